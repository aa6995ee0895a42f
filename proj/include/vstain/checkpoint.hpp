#ifndef VSTAIN_CHECKPOINT_HPP
#define VSTAIN_CHECKPOINT_HPP

#include <cstdint>
#include <string>

#include "vstain/config.hpp"
#include "vstain/nn.hpp"

namespace vstain {

// Container layout: 8-byte magic "VSCKPT01", 8-byte little-endian manifest
// length, JSON manifest (names, shapes, dtype, byte offsets, config
// fingerprint, step counter), then raw little-endian float64 payloads.
// Round-trips are bit-exact.

struct CheckpointInfo {
    int64_t step = 0;
    std::string fingerprint;
    bool has_optimizer = false;
    bool has_ema = false;
};

void save_checkpoint(const std::string& path, const nn::ParamStore& params,
                     const RunConfig& config, int64_t step, const nn::AdamW* opt = nullptr,
                     const nn::Ema* ema = nullptr);

// Loads parameter values into an already-constructed store with matching
// names and shapes. Throws on fingerprint mismatch unless
// ignore_fingerprint; on missing/mismatched tensors always.
CheckpointInfo load_checkpoint(const std::string& path, nn::ParamStore& params,
                               const RunConfig& config, bool ignore_fingerprint = false,
                               nn::AdamW* opt = nullptr, nn::Ema* ema = nullptr);

// Reads only the manifest header.
CheckpointInfo peek_checkpoint(const std::string& path);

}  // namespace vstain

#endif
