#include "vstain/codec.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vstain {

namespace {

void check_image(const Tensor& img, int f) {
    if (img.rank() != 3 || img.dim(2) != 3)
        throw std::invalid_argument("codec: expected [H,W,3] image, got " + shape_str(img.shape));
    if (img.dim(0) % f != 0 || img.dim(1) % f != 0)
        throw std::invalid_argument("codec: image dims not divisible by compression factor");
    for (double v : img.data)
        if (v < -1.0 - 1e-9 || v > 1.0 + 1e-9)
            throw std::invalid_argument("codec: pixel value outside [-1,1]");
}

void check_config(const CodecConfig& cfg) {
    if (cfg.compression_factor != 2 && cfg.compression_factor != 4 && cfg.compression_factor != 8)
        throw std::invalid_argument("codec: compression_factor must be 2, 4 or 8");
    if (cfg.latent_channels < 1) throw std::invalid_argument("codec: latent_channels >= 1");
}

}  // namespace

LatentTensor encode(const Tensor& img, const Codec& codec) {
    check_image(img, codec.config.compression_factor);
    LatentTensor z;
    z.data = codec.encode_raw(img);
    if (codec.scale_fitted) {
        for (double& v : z.data.data) v *= codec.latent_scale;
        z.scale_applied = true;
    }
    return z;
}

Tensor decode(const LatentTensor& z, const Codec& codec) {
    Tensor raw = z.data;
    if (z.scale_applied) {
        for (double& v : raw.data) v /= codec.latent_scale;
    }
    Tensor img = codec.decode_raw(raw);
    for (double& v : img.data) v = std::clamp(v, -1.0, 1.0);
    return img;
}

double fit_latent_scale(const std::vector<Tensor>& latents) {
    if (latents.size() < 100)
        throw std::invalid_argument("fit_latent_scale: need at least 100 latent tensors");
    double sum = 0.0;
    int64_t n = 0;
    for (const auto& z : latents) {
        for (double v : z.data) sum += v;
        n += z.numel();
    }
    const double mean = sum / double(n);
    double ss = 0.0;
    for (const auto& z : latents)
        for (double v : z.data) ss += (v - mean) * (v - mean);
    const double sigma = std::sqrt(ss / double(n));
    if (sigma <= 0.0) throw std::invalid_argument("fit_latent_scale: zero variance");
    return 1.0 / sigma;
}

// ---- FixedOrthogonalCodec ----

FixedOrthogonalCodec::FixedOrthogonalCodec(CodecConfig cfg) : Codec(cfg) {
    check_config(cfg);
    const int f = cfg.compression_factor;
    const int patch_dim = f * f * 3;
    if (cfg.latent_channels > patch_dim)
        throw std::invalid_argument("codec: latent_channels exceeds patch dimension");

    // Orthonormal color basis, luma-like row first.
    const double color[3][3] = {
        {1.0 / std::sqrt(3.0), 1.0 / std::sqrt(3.0), 1.0 / std::sqrt(3.0)},
        {1.0 / std::sqrt(2.0), 0.0, -1.0 / std::sqrt(2.0)},
        {1.0 / std::sqrt(6.0), -2.0 / std::sqrt(6.0), 1.0 / std::sqrt(6.0)},
    };
    // Enumerate (fx, fy, color) ordered by spatial frequency, then color.
    struct Key {
        int fx, fy, fc;
    };
    std::vector<Key> keys;
    for (int fx = 0; fx < f; ++fx)
        for (int fy = 0; fy < f; ++fy)
            for (int fc = 0; fc < 3; ++fc) keys.push_back({fx, fy, fc});
    std::stable_sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
        auto ka = std::tuple(a.fx + a.fy, std::max(a.fx, a.fy), a.fc, a.fx);
        auto kb = std::tuple(b.fx + b.fy, std::max(b.fx, b.fy), b.fc, b.fx);
        return ka < kb;
    });

    auto dct = [f](int k, int x) {
        const double c = k == 0 ? std::sqrt(1.0 / f) : std::sqrt(2.0 / f);
        return c * std::cos(M_PI * (2.0 * x + 1.0) * k / (2.0 * f));
    };

    basis_ = Tensor({cfg.latent_channels, patch_dim});
    for (int row = 0; row < cfg.latent_channels; ++row) {
        const Key& key = keys[size_t(row)];
        for (int pi = 0; pi < f; ++pi)
            for (int pj = 0; pj < f; ++pj)
                for (int ch = 0; ch < 3; ++ch)
                    basis_.at2(row, (pi * f + pj) * 3 + ch) =
                        color[key.fc][ch] * dct(key.fx, pi) * dct(key.fy, pj);
    }
}

Tensor FixedOrthogonalCodec::encode_raw(const Tensor& img) const {
    const int f = config.compression_factor;
    const int C = config.latent_channels;
    const int64_t h = img.dim(0) / f, w = img.dim(1) / f;
    Tensor patches = ad::patchify_tensor(img.reshaped({1, img.dim(0), img.dim(1), 3}), f);
    const int64_t pd = patches.dim(2);
    Tensor z({h, w, C});
    for (int64_t n = 0; n < h * w; ++n)
        for (int c = 0; c < C; ++c) {
            double acc = 0.0;
            for (int64_t k = 0; k < pd; ++k) acc += basis_.at2(c, k) * patches[n * pd + k];
            z[n * C + c] = acc;
        }
    return z;
}

Tensor FixedOrthogonalCodec::decode_raw(const Tensor& z) const {
    const int f = config.compression_factor;
    const int C = config.latent_channels;
    if (z.rank() != 3 || z.dim(2) != C)
        throw std::invalid_argument("codec: bad latent shape " + shape_str(z.shape));
    const int64_t h = z.dim(0), w = z.dim(1);
    const int64_t pd = int64_t(f) * f * 3;
    Tensor patches({1, h * w, pd});
    for (int64_t n = 0; n < h * w; ++n)
        for (int c = 0; c < C; ++c) {
            const double zv = z[n * C + c];
            for (int64_t k = 0; k < pd; ++k) patches[n * pd + k] += zv * basis_.at2(c, k);
        }
    return ad::unpatchify_tensor(patches, h * f, w * f, 3, f).reshaped({h * f, w * f, 3});
}

// ---- ToyAutoencoderCodec ----

ToyAutoencoderCodec::ToyAutoencoderCodec(CodecConfig cfg, int hidden, uint64_t seed)
    : Codec(cfg), hidden_(hidden) {
    check_config(cfg);
    std::mt19937_64 rng(seed);
    const int64_t f = cfg.compression_factor;
    const int64_t pd = f * f * 3, C = cfg.latent_channels, Hd = hidden;
    params_.add("enc.w0", nn::xavier_uniform(pd, Hd, rng));
    params_.add("enc.b0", Tensor::zeros({Hd}));
    params_.add("enc.w1", nn::xavier_uniform(Hd, Hd, rng));
    params_.add("enc.b1", Tensor::zeros({Hd}));
    params_.add("enc.w2", nn::xavier_uniform(Hd, C, rng));
    params_.add("enc.b2", Tensor::zeros({C}));
    params_.add("dec.w0", nn::xavier_uniform(C, Hd, rng));
    params_.add("dec.b0", Tensor::zeros({Hd}));
    params_.add("dec.w1", nn::xavier_uniform(Hd, Hd, rng));
    params_.add("dec.b1", Tensor::zeros({Hd}));
    params_.add("dec.w2", nn::xavier_uniform(Hd, pd, rng));
    params_.add("dec.b2", Tensor::zeros({pd}));
}

ad::Var ToyAutoencoderCodec::encode_graph(const ad::Var& imgs) const {
    const int f = config.compression_factor;
    const int64_t B = imgs->value.dim(0);
    const int64_t h = imgs->value.dim(1) / f, w = imgs->value.dim(2) / f;
    auto x = ad::patchify(imgs, f);  // [B, h*w, f*f*3]
    x = ad::gelu(ad::linear(x, params_.get("enc.w0"), params_.get("enc.b0")));
    x = ad::gelu(ad::linear(x, params_.get("enc.w1"), params_.get("enc.b1")));
    x = ad::linear(x, params_.get("enc.w2"), params_.get("enc.b2"));
    return ad::reshape(x, {B, h, w, int64_t(config.latent_channels)});
}

ad::Var ToyAutoencoderCodec::decode_graph(const ad::Var& z) const {
    const int f = config.compression_factor;
    const int64_t B = z->value.dim(0), h = z->value.dim(1), w = z->value.dim(2);
    auto x = ad::reshape(z, {B, h * w, int64_t(config.latent_channels)});
    x = ad::gelu(ad::linear(x, params_.get("dec.w0"), params_.get("dec.b0")));
    x = ad::gelu(ad::linear(x, params_.get("dec.w1"), params_.get("dec.b1")));
    x = ad::tanh_(ad::linear(x, params_.get("dec.w2"), params_.get("dec.b2")));
    return ad::unpatchify(x, h * f, w * f, 3, f);
}

Tensor ToyAutoencoderCodec::encode_raw(const Tensor& img) const {
    auto v = encode_graph(ad::constant(img.reshaped({1, img.dim(0), img.dim(1), 3})));
    const auto& s = v->value.shape;
    return v->value.reshaped({s[1], s[2], s[3]});
}

Tensor ToyAutoencoderCodec::decode_raw(const Tensor& z) const {
    auto v = decode_graph(ad::constant(z.reshaped({1, z.dim(0), z.dim(1), z.dim(2)})));
    const auto& s = v->value.shape;
    return v->value.reshaped({s[1], s[2], s[3]});
}

ToyAutoencoderCodec::FitResult ToyAutoencoderCodec::fit(const std::vector<Tensor>& images,
                                                        int steps, int batch_size, double lr,
                                                        uint64_t seed) {
    if (images.empty()) throw std::invalid_argument("toy autoencoder: no training images");
    nn::AdamWConfig ocfg;
    ocfg.lr = lr;
    nn::AdamW opt(params_, ocfg);
    const int64_t H = images[0].dim(0), W = images[0].dim(1);
    FitResult res;
    for (int step = 0; step < steps; ++step) {
        std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (uint64_t(step) + 1)));
        std::uniform_int_distribution<size_t> pick(0, images.size() - 1);
        Tensor batch({int64_t(batch_size), H, W, 3});
        for (int b = 0; b < batch_size; ++b) {
            const Tensor& img = images[pick(rng)];
            std::copy(img.data.begin(), img.data.end(), batch.data.begin() + b * H * W * 3);
        }
        auto in = ad::constant(batch);
        auto rec = decode_graph(encode_graph(in));
        auto diff = ad::sub(rec, in);
        auto loss = ad::mean_all(ad::mul(diff, diff));
        params_.zero_grads();
        ad::backward(loss);
        opt.step();
        if (step == 0) res.first_loss = loss->value[0];
        res.final_loss = loss->value[0];
    }
    return res;
}

std::unique_ptr<Codec> make_codec(const CodecConfig& cfg, uint64_t seed) {
    if (cfg.kind == CodecKind::fixed_orthogonal)
        return std::make_unique<FixedOrthogonalCodec>(cfg);
    return std::make_unique<ToyAutoencoderCodec>(cfg, 64, seed);
}

}  // namespace vstain
