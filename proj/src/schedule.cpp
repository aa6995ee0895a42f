#include "vstain/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace vstain {

namespace {

NoiseSchedule finish(NoiseSchedule s) {
    s.alphas.resize(s.betas.size());
    s.alpha_bars.resize(s.betas.size());
    double acc = 1.0;
    for (size_t t = 0; t < s.betas.size(); ++t) {
        s.alphas[t] = 1.0 - s.betas[t];
        acc *= s.alphas[t];
        s.alpha_bars[t] = acc;
    }
    return s;
}

void check_range(int T, double beta_start, double beta_end) {
    if (T < 2) throw std::invalid_argument("schedule: T must be >= 2");
    if (!(0.0 < beta_start && beta_start < beta_end && beta_end < 1.0))
        throw std::invalid_argument("schedule: need 0 < beta_start < beta_end < 1");
}

}  // namespace

NoiseSchedule make_scaled_linear(int T, double beta_start, double beta_end) {
    check_range(T, beta_start, beta_end);
    NoiseSchedule s;
    s.T = T;
    s.betas.resize(size_t(T));
    const double r0 = std::sqrt(beta_start), r1 = std::sqrt(beta_end);
    for (int t = 0; t < T; ++t) {
        const double r = r0 + (double(t) / double(T - 1)) * (r1 - r0);
        s.betas[size_t(t)] = r * r;
    }
    return finish(std::move(s));
}

NoiseSchedule make_linear(int T, double beta_start, double beta_end) {
    check_range(T, beta_start, beta_end);
    NoiseSchedule s;
    s.T = T;
    s.betas.resize(size_t(T));
    for (int t = 0; t < T; ++t)
        s.betas[size_t(t)] = beta_start + (double(t) / double(T - 1)) * (beta_end - beta_start);
    return finish(std::move(s));
}

Tensor forward_diffuse(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& sched) {
    check_same_shape(x0, eps, "forward_diffuse");
    if (t < 0 || t >= sched.T) throw std::out_of_range("forward_diffuse: timestep out of range");
    const double ab = sched.alpha_bars[size_t(t)];
    const double sa = std::sqrt(ab), sb = std::sqrt(1.0 - ab);
    Tensor out(x0.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = sa * x0[i] + sb * eps[i];
    return out;
}

double posterior_variance(const NoiseSchedule& sched, int t) {
    if (t < 0 || t >= sched.T) throw std::out_of_range("posterior_variance: timestep out of range");
    const double ab_prev = t == 0 ? 1.0 : sched.alpha_bars[size_t(t - 1)];
    return sched.betas[size_t(t)] * (1.0 - ab_prev) / (1.0 - sched.alpha_bars[size_t(t)]);
}

Tensor posterior_step(const Tensor& x_t, const Tensor& eps_pred, int t,
                      const NoiseSchedule& sched, const Tensor& noise) {
    check_same_shape(x_t, eps_pred, "posterior_step");
    if (t < 0 || t >= sched.T) throw std::out_of_range("posterior_step: timestep out of range");
    const double beta = sched.betas[size_t(t)];
    const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alphas[size_t(t)]);
    const double coef = beta / std::sqrt(1.0 - sched.alpha_bars[size_t(t)]);
    Tensor out(x_t.shape);
    for (int64_t i = 0; i < out.numel(); ++i)
        out[i] = inv_sqrt_alpha * (x_t[i] - coef * eps_pred[i]);
    if (t > 0) {
        check_same_shape(x_t, noise, "posterior_step noise");
        const double sigma = std::sqrt(posterior_variance(sched, t));
        for (int64_t i = 0; i < out.numel(); ++i) out[i] += sigma * noise[i];
    }
    return out;
}

}  // namespace vstain
