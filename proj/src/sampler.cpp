#include "vstain/sampler.hpp"

#include <cmath>

namespace vstain {

Tensor cfg_combine(const Tensor& eps_uncond, const Tensor& eps_cond, double scale) {
    check_same_shape(eps_uncond, eps_cond, "cfg_combine");
    Tensor out(eps_uncond.shape);
    for (int64_t i = 0; i < out.numel(); ++i)
        out[i] = eps_uncond[i] + scale * (eps_cond[i] - eps_uncond[i]);
    return out;
}

std::vector<int> sampling_timesteps(int T, int steps) {
    if (steps <= 0 || steps >= T) {
        std::vector<int> ts(static_cast<size_t>(T));
        for (int i = 0; i < T; ++i) ts[size_t(i)] = T - 1 - i;
        return ts;
    }
    std::vector<int> ts(static_cast<size_t>(steps));
    for (int i = 0; i < steps; ++i) {
        const double f = steps == 1 ? 0.0 : double(i) / double(steps - 1);
        ts[size_t(i)] = int(std::lround((1.0 - f) * double(T - 1)));
    }
    return ts;
}

Tensor sample_latent(const DiTModel& model, const ConditionBundle& cond,
                     const NoiseSchedule& sched, const GuidanceConfig& g, int64_t latent_h,
                     int64_t latent_w) {
    g.validate();
    std::mt19937_64 rng(g.seed);
    Tensor z = Tensor::randn({latent_h, latent_w, int64_t(model.config().latent_channels)}, rng);
    const ConditionBundle null_cond = model.null_bundle(latent_h, latent_w);
    const auto ts = sampling_timesteps(sched.T, g.steps);
    for (size_t i = 0; i < ts.size(); ++i) {
        const int t = ts[i];
        const Tensor eps_u = model.denoise(z, t, null_cond);
        const Tensor eps_c = model.denoise(z, t, cond);
        const Tensor eps = cfg_combine(eps_u, eps_c, g.scale);
        const bool last = i + 1 == ts.size();
        if (ts.size() == size_t(sched.T)) {
            Tensor noise = last ? Tensor::zeros(z.shape) : Tensor::randn(z.shape, rng);
            z = posterior_step(z, eps, t, sched, noise);
        } else {
            // Strided step: re-indexed cumulative-signal ratios.
            const double ab_t = sched.alpha_bars[size_t(t)];
            const double ab_prev = last ? 1.0 : sched.alpha_bars[size_t(ts[i + 1])];
            const double alpha_eff = ab_t / ab_prev;
            const double beta_eff = 1.0 - alpha_eff;
            const double coef = beta_eff / std::sqrt(1.0 - ab_t);
            const double var = beta_eff * (1.0 - ab_prev) / (1.0 - ab_t);
            Tensor noise = last ? Tensor::zeros(z.shape) : Tensor::randn(z.shape, rng);
            const double sigma = last ? 0.0 : std::sqrt(var);
            Tensor next(z.shape);
            const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha_eff);
            for (int64_t j = 0; j < z.numel(); ++j)
                next[j] = inv_sqrt_alpha * (z[j] - coef * eps[j]) + sigma * noise[j];
            z = std::move(next);
        }
    }
    return z;
}

Tensor translate(const Tensor& he_img, const DiTModel& model, const SemanticEncoder& enc,
                 const Codec& codec, const NoiseSchedule& sched, const GuidanceConfig& g) {
    const ConditionBundle cond = make_bundle(he_img, enc, codec);
    const int f = codec.config.compression_factor;
    const int64_t lh = he_img.dim(0) / f, lw = he_img.dim(1) / f;
    Tensor z = sample_latent(model, cond, sched, g, lh, lw);
    LatentTensor lat{z, codec.scale_fitted};
    return decode(lat, codec);
}

}  // namespace vstain
