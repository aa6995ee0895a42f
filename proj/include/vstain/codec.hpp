#ifndef VSTAIN_CODEC_HPP
#define VSTAIN_CODEC_HPP

#include <memory>
#include <vector>

#include "vstain/nn.hpp"
#include "vstain/tensor.hpp"

namespace vstain {

enum class CodecKind { fixed_orthogonal, toy_autoencoder };

struct CodecConfig {
    CodecKind kind = CodecKind::fixed_orthogonal;
    int compression_factor = 8;  // in {2,4,8}
    int latent_channels = 4;
};

struct LatentTensor {
    Tensor data;  // [h, w, C_lat]
    bool scale_applied = false;
};

// Pixel <-> latent codec. Images are [H,W,3] in [-1,1]; encode is
// deterministic (the encoder emits means, no sampling).
class Codec {
public:
    explicit Codec(CodecConfig cfg) : config(cfg) {}
    virtual ~Codec() = default;

    CodecConfig config;
    double latent_scale = 1.0;  // multiplies raw latents once fitted
    bool scale_fitted = false;

    virtual Tensor encode_raw(const Tensor& img) const = 0;
    virtual Tensor decode_raw(const Tensor& z) const = 0;
    virtual nn::ParamStore* params() { return nullptr; }
    virtual const nn::ParamStore* params() const { return nullptr; }
};

LatentTensor encode(const Tensor& img, const Codec& codec);
Tensor decode(const LatentTensor& z, const Codec& codec);

// Returns 1/sigma over the pooled elementwise values; needs >= 100 latents.
double fit_latent_scale(const std::vector<Tensor>& latents);

// Deterministic invertible patch transform with channel truncation. Rows of
// basis() are orthonormal: an orthonormal color basis crossed with the 2-D
// DCT-II, kept in increasing spatial-frequency order.
class FixedOrthogonalCodec : public Codec {
public:
    explicit FixedOrthogonalCodec(CodecConfig cfg);
    Tensor encode_raw(const Tensor& img) const override;
    Tensor decode_raw(const Tensor& z) const override;
    const Tensor& basis() const { return basis_; }  // [C_lat, f*f*3]

private:
    Tensor basis_;
};

// Small patch-strided convolutional encoder/decoder trained with a pixel
// reconstruction loss.
class ToyAutoencoderCodec : public Codec {
public:
    ToyAutoencoderCodec(CodecConfig cfg, int hidden, uint64_t seed);

    Tensor encode_raw(const Tensor& img) const override;
    Tensor decode_raw(const Tensor& z) const override;
    nn::ParamStore* params() override { return &params_; }
    const nn::ParamStore* params() const override { return &params_; }
    int hidden() const { return hidden_; }

    // Batched graph paths used by training.
    ad::Var encode_graph(const ad::Var& imgs) const;  // [B,H,W,3] -> [B,h,w,C]
    ad::Var decode_graph(const ad::Var& z) const;     // [B,h,w,C] -> [B,H,W,3]

    struct FitResult {
        double first_loss = 0.0;
        double final_loss = 0.0;
    };
    FitResult fit(const std::vector<Tensor>& images, int steps, int batch_size,
                  double lr, uint64_t seed);

private:
    int hidden_;
    nn::ParamStore params_;
};

std::unique_ptr<Codec> make_codec(const CodecConfig& cfg, uint64_t seed);

}  // namespace vstain

#endif
