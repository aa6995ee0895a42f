#ifndef VSTAIN_CONFIG_HPP
#define VSTAIN_CONFIG_HPP

#include <cstdint>
#include <string>

#include "vstain/backbone.hpp"
#include "vstain/codec.hpp"
#include "vstain/objective.hpp"
#include "vstain/sampler.hpp"

namespace vstain {

struct ScheduleConfig {
    int T = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
};

struct DataConfig {
    std::string he_dir;
    std::string ihc_dir;
    int image_size = 64;
};

struct OptimizerConfig {
    double lr = 3e-5;
    int batch_size = 8;
    int steps = 2000;
    uint64_t seed = 0;
    double weight_decay = 0.01;
    double ema_decay = 0.0;  // 0 disables EMA
    int checkpoint_every = 500;
    int codec_fit_steps = 300;  // toy-autoencoder pre-fit budget
};

// Full run configuration. Every field has a default; JSON parsing rejects
// unknown keys; flags applied by the CLI take precedence over the file.
struct RunConfig {
    DiTConfig model;           // model.latent_channels mirrors codec.latent_channels
    CodecConfig codec;
    ScheduleConfig schedule;
    LossWeights loss;
    GuidanceConfig guidance;
    double cond_drop_p = 0.11;  // joint CFG dropout probability
    DataConfig data;
    OptimizerConfig opt;

    void validate() const;
    // Canonical JSON text: fixed key order, all fields explicit. Parsing the
    // normalized form reproduces an identical config.
    std::string normalized() const;
    // FNV-1a 64-bit hash of the normalized form, as 16 hex digits.
    std::string fingerprint() const;
};

// Strict parse: unknown keys at any level throw std::invalid_argument.
RunConfig config_from_json_text(const std::string& text);
RunConfig config_from_file(const std::string& path);

// FNV-1a 64-bit over bytes.
uint64_t fnv1a64(const std::string& s);

// Prefixes relative paths with $VSTAIN_DATA_ROOT when it is set.
std::string resolve_data_path(const std::string& path);

}  // namespace vstain

#endif
