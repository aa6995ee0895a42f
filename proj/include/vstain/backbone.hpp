#ifndef VSTAIN_BACKBONE_HPP
#define VSTAIN_BACKBONE_HPP

#include <string>
#include <vector>

#include "vstain/conditioning.hpp"
#include "vstain/nn.hpp"

namespace vstain {

enum class ConditioningMode { dual_cross_attn, dual_concat, semantic_only, spatial_only };

ConditioningMode conditioning_mode_from_string(const std::string& s);
std::string to_string(ConditioningMode m);

struct DiTConfig {
    int patch_size = 2;
    int hidden_dim = 256;
    int depth = 6;
    int num_heads = 4;
    int d_sem = 64;
    int latent_channels = 4;
    ConditioningMode mode = ConditioningMode::dual_cross_attn;
    bool cross_attn_every_block = true;  // false: cross-attention on odd blocks only

    void validate() const;
    bool uses_cross_attn() const {
        return mode == ConditioningMode::dual_cross_attn || mode == ConditioningMode::spatial_only;
    }
    bool uses_semantic() const {
        return mode == ConditioningMode::dual_cross_attn ||
               mode == ConditioningMode::dual_concat ||
               mode == ConditioningMode::semantic_only;
    }
    bool uses_concat() const { return mode == ConditioningMode::dual_concat; }
    bool block_has_cross(int i) const {
        return uses_cross_attn() && (cross_attn_every_block || i % 2 == 1);
    }
    int input_channels() const { return uses_concat() ? 2 * latent_channels : latent_channels; }
};

// Eq-1-style modulation: gamma(c) ⊙ LN(tokens) + beta(c). The modulation
// network is a single linear layer on c emitting [gamma, beta] per dimension.
ad::Var ada_ln_modulate(const ad::Var& tokens, const ad::Var& c_combined, const ad::Var& mlp_w,
                        const ad::Var& mlp_b);

struct CrossAttnWeights {
    ad::Var wq, bq, wk, bk, wv, bv, wo, bo;
    int heads = 1;
};

// Multi-head cross-attention: queries attend over the spatial condition
// tokens (keys and values). Residual connection is the caller's job.
ad::Var cross_attend(const ad::Var& queries, const ad::Var& spatial_tokens,
                     const CrossAttnWeights& w);

// Dual-stream DiT denoiser.
class DiTModel {
public:
    DiTModel(DiTConfig cfg, uint64_t seed);

    const DiTConfig& config() const { return cfg_; }
    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    const SpatialTokenizer& spatial_tokenizer() const { return *tokenizer_; }

    // Batched training path: z_t [B,h,w,C], one timestep and bundle per sample.
    ad::Var forward(const Tensor& z_t, const std::vector<int>& t,
                    const std::vector<ConditionBundle>& cond) const;

    // Single-sample inference path.
    Tensor denoise(const Tensor& z_t, int t, const ConditionBundle& cond) const;

    // A bundle whose both streams are dropped (the unconditional branch).
    ConditionBundle null_bundle(int64_t latent_h, int64_t latent_w) const;

    Tensor null_sem_value() const { return params_.get("cond.sem.null")->value; }

private:
    DiTConfig cfg_;
    nn::ParamStore params_;
    std::unique_ptr<SpatialTokenizer> tokenizer_;
};

}  // namespace vstain

#endif
