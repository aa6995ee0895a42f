#ifndef VSTAIN_SCHEDULE_HPP
#define VSTAIN_SCHEDULE_HPP

#include <vector>

#include "vstain/tensor.hpp"

namespace vstain {

// Immutable diffusion timestep tables. Timesteps are 0-indexed; alpha_bars[t]
// includes beta[t] in its cumulative product.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> betas;
    std::vector<double> alphas;
    std::vector<double> alpha_bars;

    double snr(int t) const { return alpha_bars[size_t(t)] / (1.0 - alpha_bars[size_t(t)]); }
};

// Scaled-linear schedule: linear interpolation in sqrt(beta), then squared.
NoiseSchedule make_scaled_linear(int T, double beta_start, double beta_end);

// Plain-linear schedule with the same endpoints (for SNR-decay comparisons).
NoiseSchedule make_linear(int T, double beta_start, double beta_end);

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps
Tensor forward_diffuse(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& sched);

// DDPM ancestral step with posterior variance beta_tilde; noise ignored at t=0.
Tensor posterior_step(const Tensor& x_t, const Tensor& eps_pred, int t,
                      const NoiseSchedule& sched, const Tensor& noise);

// Posterior variance beta_tilde_t = beta_t (1 - abar_{t-1}) / (1 - abar_t), abar_{-1} = 1.
double posterior_variance(const NoiseSchedule& sched, int t);

}  // namespace vstain

#endif
