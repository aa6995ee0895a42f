#include "vstain/conditioning.hpp"

#include <cmath>
#include <stdexcept>

namespace vstain {

Tensor encode_semantic(const Tensor& img, const SemanticEncoder& encoder) {
    return encoder.encode(img);
}

namespace {

// BT.601 luma of an RGB image in any range.
Tensor to_luma(const Tensor& img) {
    const int64_t H = img.dim(0), W = img.dim(1);
    Tensor y({H, W});
    for (int64_t i = 0; i < H * W; ++i)
        y[i] = 0.299 * img[i * 3] + 0.587 * img[i * 3 + 1] + 0.114 * img[i * 3 + 2];
    return y;
}

}  // namespace

RandomProjectionEncoder::RandomProjectionEncoder(int out_dim, uint64_t seed) {
    std::mt19937_64 rng(seed);
    projection_ = Tensor::randn({64, out_dim}, rng, 1.0 / 8.0);
}

Tensor RandomProjectionEncoder::encode(const Tensor& img) const {
    if (img.rank() != 3 || img.dim(2) != 3)
        throw std::invalid_argument("semantic encoder: expected [H,W,3]");
    const int64_t H = img.dim(0), W = img.dim(1);
    if (H % 8 != 0 || W % 8 != 0)
        throw std::invalid_argument("semantic encoder: dims must be divisible by 8");
    Tensor luma = to_luma(img);
    const int64_t bh = H / 8, bw = W / 8;
    Tensor pooled({64});
    for (int64_t i = 0; i < 8; ++i)
        for (int64_t j = 0; j < 8; ++j) {
            double acc = 0.0;
            for (int64_t u = 0; u < bh; ++u)
                for (int64_t v = 0; v < bw; ++v) acc += luma[(i * bh + u) * W + j * bw + v];
            pooled[i * 8 + j] = acc / double(bh * bw);
        }
    const int64_t D = projection_.dim(1);
    Tensor out({D});
    for (int64_t d = 0; d < D; ++d) {
        double acc = 0.0;
        for (int64_t k = 0; k < 64; ++k) acc += pooled[k] * projection_.at2(k, d);
        out[d] = acc;
    }
    return out;
}

TinyVitEncoder::TinyVitEncoder(int image_size, int patch, int hidden, int depth, int heads,
                               int num_classes, uint64_t seed)
    : image_size_(image_size), patch_(patch), hidden_(hidden), depth_(depth), heads_(heads) {
    if (image_size % patch != 0) throw std::invalid_argument("tiny vit: patch must divide size");
    std::mt19937_64 rng(seed);
    const int64_t pd = int64_t(patch) * patch * 3, Hd = hidden;
    const int64_t g = image_size / patch;
    pos_ = nn::pos_embed_2d(g, g, Hd);
    params_.add("embed.w", nn::xavier_uniform(pd, Hd, rng));
    params_.add("embed.b", Tensor::zeros({Hd}));
    for (int i = 0; i < depth; ++i) {
        const std::string p = "blk" + std::to_string(i) + ".";
        for (const char* nm : {"wq", "wk", "wv", "wo"})
            params_.add(p + nm, nn::xavier_uniform(Hd, Hd, rng));
        for (const char* nm : {"bq", "bk", "bv", "bo"}) params_.add(p + nm, Tensor::zeros({Hd}));
        params_.add(p + "ffn.w0", nn::xavier_uniform(Hd, 4 * Hd, rng));
        params_.add(p + "ffn.b0", Tensor::zeros({4 * Hd}));
        params_.add(p + "ffn.w1", nn::xavier_uniform(4 * Hd, Hd, rng));
        params_.add(p + "ffn.b1", Tensor::zeros({Hd}));
    }
    params_.add("head.w", nn::xavier_uniform(Hd, num_classes, rng));
    params_.add("head.b", Tensor::zeros({num_classes}));
}

ad::Var TinyVitEncoder::features(const ad::Var& imgs) const {
    auto x = ad::patchify(imgs, patch_);
    x = ad::linear(x, params_.get("embed.w"), params_.get("embed.b"));
    x = ad::add(x, ad::constant(pos_.reshaped({1, pos_.dim(0), pos_.dim(1)})));
    for (int i = 0; i < depth_; ++i) {
        const std::string p = "blk" + std::to_string(i) + ".";
        auto a = ad::layernorm(x);
        auto attn = ad::multi_head_attention(
            ad::linear(a, params_.get(p + "wq"), params_.get(p + "bq")),
            ad::linear(a, params_.get(p + "wk"), params_.get(p + "bk")),
            ad::linear(a, params_.get(p + "wv"), params_.get(p + "bv")), heads_);
        x = ad::add(x, ad::linear(attn, params_.get(p + "wo"), params_.get(p + "bo")));
        auto f = ad::layernorm(x);
        f = ad::gelu(ad::linear(f, params_.get(p + "ffn.w0"), params_.get(p + "ffn.b0")));
        f = ad::linear(f, params_.get(p + "ffn.w1"), params_.get(p + "ffn.b1"));
        x = ad::add(x, f);
    }
    return ad::mean_axis1(ad::layernorm(x));
}

Tensor TinyVitEncoder::encode(const Tensor& img) const {
    if (img.dim(0) != image_size_ || img.dim(1) != image_size_)
        throw std::invalid_argument("tiny vit: unexpected image size");
    auto v = features(ad::constant(img.reshaped({1, img.dim(0), img.dim(1), 3})));
    return v->value.reshaped({v->value.dim(1)});
}

TinyVitEncoder::FitResult TinyVitEncoder::fit(const std::vector<Tensor>& images,
                                              const std::vector<int>& labels, int steps,
                                              int batch_size, double lr, uint64_t seed) {
    if (images.size() != labels.size() || images.empty())
        throw std::invalid_argument("tiny vit fit: bad dataset");
    nn::AdamWConfig ocfg;
    ocfg.lr = lr;
    nn::AdamW opt(params_, ocfg);
    FitResult res;
    const int64_t H = images[0].dim(0), W = images[0].dim(1);
    for (int step = 0; step < steps; ++step) {
        std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (uint64_t(step) + 1)));
        std::uniform_int_distribution<size_t> pick(0, images.size() - 1);
        Tensor batch({int64_t(batch_size), H, W, 3});
        std::vector<int> lab(static_cast<size_t>(batch_size));
        for (int b = 0; b < batch_size; ++b) {
            const size_t i = pick(rng);
            std::copy(images[i].data.begin(), images[i].data.end(),
                      batch.data.begin() + b * H * W * 3);
            lab[size_t(b)] = labels[i];
        }
        auto feats = features(ad::constant(batch));
        auto logits = ad::linear(feats, params_.get("head.w"), params_.get("head.b"));
        auto loss = ad::softmax_cross_entropy(logits, lab);
        params_.zero_grads();
        ad::backward(loss);
        opt.step();
        if (step == 0) res.first_loss = loss->value[0];
        res.final_loss = loss->value[0];
    }
    return res;
}

SpatialTokenizer::SpatialTokenizer(nn::ParamStore& store, int patch, int latent_channels,
                                   int token_dim, uint64_t seed, bool use_posenc)
    : patch_(patch), latent_channels_(latent_channels), token_dim_(token_dim),
      use_posenc_(use_posenc) {
    std::mt19937_64 rng(seed);
    const int64_t pd = int64_t(patch) * patch * latent_channels;
    w_ = store.add("cond.spatial.w", nn::xavier_uniform(pd, token_dim, rng));
    b_ = store.add("cond.spatial.b", Tensor::zeros({token_dim}));
    null_token_ = store.add("cond.spatial.null", Tensor::randn({1, 1, int64_t(token_dim)}, rng, 0.02));
}

ad::Var SpatialTokenizer::tokens(const ad::Var& latents, const std::vector<bool>& dropped) const {
    const int64_t B = latents->value.dim(0);
    const int64_t h = latents->value.dim(1), w = latents->value.dim(2);
    if (h % patch_ != 0 || w % patch_ != 0)
        throw std::invalid_argument("spatial tokenizer: latent dims not divisible by patch");
    if (int64_t(dropped.size()) != B)
        throw std::invalid_argument("spatial tokenizer: drop-flag count mismatch");
    auto x = ad::patchify(latents, patch_);
    x = ad::linear(x, w_, b_);
    if (use_posenc_) {
        Tensor pos = nn::pos_embed_2d(h / patch_, w / patch_, token_dim_);
        x = ad::add(x, ad::constant(pos.reshaped({1, pos.dim(0), pos.dim(1)})));
    }
    bool any = false;
    for (bool d : dropped) any = any || d;
    if (!any) return x;
    Tensor mask({B, 1, 1});
    for (int64_t b = 0; b < B; ++b) mask[b] = dropped[size_t(b)] ? 1.0 : 0.0;
    Tensor inv = mask;
    for (auto& v : inv.data) v = 1.0 - v;
    auto m = ad::constant(mask), mi = ad::constant(inv);
    const int64_t N = x->value.dim(1);
    auto nulls = ad::broadcast_to(null_token_, {B, N, int64_t(token_dim_)});
    return ad::add(ad::mul(mi, x), ad::mul(m, nulls));
}

Tensor encode_spatial(const Tensor& img, const Codec& codec, const SpatialTokenizer& tok) {
    LatentTensor z = encode(img, codec);
    auto latents = ad::constant(
        z.data.reshaped({1, z.data.dim(0), z.data.dim(1), z.data.dim(2)}));
    auto t = tok.tokens(latents, {false});
    return t->value.reshaped({t->value.dim(1), t->value.dim(2)});
}

ConditionBundle apply_cfg_dropout(const ConditionBundle& bundle, double p_drop,
                                  std::mt19937_64& rng, const Tensor& null_sem) {
    if (p_drop < 0.0 || p_drop >= 1.0)
        throw std::invalid_argument("apply_cfg_dropout: need 0 <= p_drop < 1");
    ConditionBundle out = bundle;
    std::bernoulli_distribution drop(p_drop);
    if (p_drop > 0.0 && drop(rng)) {
        out.sem_dropped = true;
        out.spatial_dropped = true;
        out.c_sem = null_sem;
    }
    return out;
}

ConditionBundle make_bundle(const Tensor& he_img, const SemanticEncoder& enc, const Codec& codec) {
    ConditionBundle b;
    b.c_sem = enc.encode(he_img);
    b.spatial_latent = encode(he_img, codec).data;
    return b;
}

}  // namespace vstain
