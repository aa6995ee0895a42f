#ifndef VSTAIN_TRAINER_HPP
#define VSTAIN_TRAINER_HPP

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "vstain/checkpoint.hpp"
#include "vstain/config.hpp"
#include "vstain/sampler.hpp"
#include "vstain/synthdata.hpp"

namespace vstain {

// Raised on numerical failure (non-finite loss); the CLI maps it to its own
// exit code so scripted runs can tell it from data problems.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Everything needed to train or translate: codec, frozen semantic encoder,
// denoiser and schedule, all derived deterministically from the config.
struct Pipeline {
    RunConfig cfg;
    std::unique_ptr<Codec> codec;
    std::unique_ptr<SemanticEncoder> sem;
    std::unique_ptr<DiTModel> model;
    NoiseSchedule sched;
};

Pipeline make_pipeline(const RunConfig& cfg);

// Checkpoints cover model parameters, optimizer/EMA state, codec parameters
// (when the codec is trainable) and the fitted latent scale.
void save_pipeline(const Pipeline& p, const std::string& path, int64_t step,
                   const nn::AdamW* opt = nullptr, const nn::Ema* ema = nullptr);
CheckpointInfo load_pipeline(Pipeline& p, const std::string& path,
                             bool ignore_fingerprint = false, nn::AdamW* opt = nullptr,
                             nn::Ema* ema = nullptr);

struct TrainOptions {
    std::string out_dir;       // receives checkpoint.vsckpt, loss.csv, .lock
    std::string resume_from;   // optional checkpoint to continue from
    bool ignore_fingerprint = false;
    bool quiet = false;
};

struct TrainResult {
    double step0_loss = 0.0;
    double final_loss = 0.0;
    std::string checkpoint_path;
    std::vector<double> losses;  // one entry per executed step
};

// Full training run: optional codec fit, latent-scale fit, then the seeded
// diffusion loop. Deterministic under (config, pairs); per-step randomness is
// derived as seed ^ (golden_ratio * (step+1)) so resumed runs are bit-exact.
// Throws std::runtime_error mentioning the batch seed on non-finite loss.
TrainResult train_run(Pipeline& p, const std::vector<synth::SlidePair>& pairs,
                      const TrainOptions& opts);

// Per-step RNG stream derivation shared by training and tests.
uint64_t step_seed(uint64_t seed, int64_t step);

// Deterministic per-image sampling seed: global seed + FNV-1a of the name.
uint64_t image_seed(uint64_t seed, const std::string& filename);

}  // namespace vstain

#endif
