#ifndef VSTAIN_CONDITIONING_HPP
#define VSTAIN_CONDITIONING_HPP

#include <memory>
#include <random>
#include <vector>

#include "vstain/codec.hpp"
#include "vstain/nn.hpp"
#include "vstain/tensor.hpp"

namespace vstain {

// Per-sample conditioning inputs derived from the source H&E image. The
// spatial stream is carried as the (scaled) latent map; token projection and
// null-token substitution happen in the denoiser's spatial tokenizer so that
// the null parameters receive gradients.
struct ConditionBundle {
    Tensor c_sem;           // [D_sem]
    Tensor spatial_latent;  // [h, w, C_lat]
    bool sem_dropped = false;
    bool spatial_dropped = false;
};

// Frozen feature extractor for the semantic stream.
class SemanticEncoder {
public:
    virtual ~SemanticEncoder() = default;
    virtual Tensor encode(const Tensor& img) const = 0;  // [H,W,3] -> [dim]
    virtual int dim() const = 0;
};

Tensor encode_semantic(const Tensor& img, const SemanticEncoder& encoder);

// Fixed random projection of an 8x8 average-pooled grayscale image.
class RandomProjectionEncoder : public SemanticEncoder {
public:
    RandomProjectionEncoder(int out_dim, uint64_t seed);
    Tensor encode(const Tensor& img) const override;
    int dim() const override { return int(projection_.dim(1)); }
    const Tensor& projection() const { return projection_; }  // [64, out_dim]

private:
    Tensor projection_;
};

// Tiny vision transformer, trainable on class labels and then frozen; the
// mean-pooled pre-head feature is the semantic embedding.
class TinyVitEncoder : public SemanticEncoder {
public:
    TinyVitEncoder(int image_size, int patch, int hidden, int depth, int heads,
                   int num_classes, uint64_t seed);
    Tensor encode(const Tensor& img) const override;
    int dim() const override { return hidden_; }

    struct FitResult {
        double first_loss = 0.0;
        double final_loss = 0.0;
    };
    // Supervised pre-fit on labels; the encoder is frozen afterwards.
    FitResult fit(const std::vector<Tensor>& images, const std::vector<int>& labels,
                  int steps, int batch_size, double lr, uint64_t seed);

private:
    ad::Var features(const ad::Var& imgs) const;  // [B,H,W,3] -> [B,hidden]
    int image_size_, patch_, hidden_, depth_, heads_;
    Tensor pos_;
    nn::ParamStore params_;
};

// Projects patchified spatial latents into condition tokens. Registers its
// parameters (projection + learned null token) into the given store.
class SpatialTokenizer {
public:
    SpatialTokenizer(nn::ParamStore& store, int patch, int latent_channels, int token_dim,
                     uint64_t seed, bool use_posenc = true);

    // latents: [B,h,w,C]; dropped[b] substitutes the null token at every
    // position of sample b (no positional encoding on dropped samples).
    ad::Var tokens(const ad::Var& latents, const std::vector<bool>& dropped) const;
    int token_dim() const { return token_dim_; }
    int patch() const { return patch_; }

private:
    int patch_, latent_channels_, token_dim_;
    bool use_posenc_;
    ad::Var w_, b_, null_token_;
};

// Spec-level operation: tokens for one image through the shared codec path.
Tensor encode_spatial(const Tensor& img, const Codec& codec, const SpatialTokenizer& tok);

// Joint CFG dropout: with probability p_drop both streams are dropped and the
// semantic null embedding substituted. Never mutates the input bundle.
ConditionBundle apply_cfg_dropout(const ConditionBundle& bundle, double p_drop,
                                  std::mt19937_64& rng, const Tensor& null_sem);

ConditionBundle make_bundle(const Tensor& he_img, const SemanticEncoder& enc, const Codec& codec);

}  // namespace vstain

#endif
