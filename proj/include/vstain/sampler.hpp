#ifndef VSTAIN_SAMPLER_HPP
#define VSTAIN_SAMPLER_HPP

#include "vstain/backbone.hpp"
#include "vstain/codec.hpp"
#include "vstain/conditioning.hpp"
#include "vstain/schedule.hpp"

namespace vstain {

struct GuidanceConfig {
    double scale = 3.0;
    uint64_t seed = 0;
    int steps = 0;  // 0 means the full T

    void validate() const {
        if (scale < 0.0) throw std::invalid_argument("guidance scale must be >= 0");
    }
};

// eps_uncond + scale * (eps_cond - eps_uncond), elementwise.
Tensor cfg_combine(const Tensor& eps_uncond, const Tensor& eps_cond, double scale);

// Reverse process in latent space. Starts from seeded standard-normal noise
// and runs iterated posterior steps on CFG-combined noise predictions; both
// branches share the posterior noise draw. Returns the final (scaled) latent.
Tensor sample_latent(const DiTModel& model, const ConditionBundle& cond,
                     const NoiseSchedule& sched, const GuidanceConfig& g, int64_t latent_h,
                     int64_t latent_w);

// Full image-to-image path: encode the H&E source, sample, decode.
Tensor translate(const Tensor& he_img, const DiTModel& model, const SemanticEncoder& enc,
                 const Codec& codec, const NoiseSchedule& sched, const GuidanceConfig& g);

// Evenly spaced descending timestep subsequence used for strided sampling.
std::vector<int> sampling_timesteps(int T, int steps);

}  // namespace vstain

#endif
