#include "vstain/backbone.hpp"

#include <stdexcept>

namespace vstain {

ConditioningMode conditioning_mode_from_string(const std::string& s) {
    if (s == "dual_cross_attn") return ConditioningMode::dual_cross_attn;
    if (s == "dual_concat") return ConditioningMode::dual_concat;
    if (s == "semantic_only") return ConditioningMode::semantic_only;
    if (s == "spatial_only") return ConditioningMode::spatial_only;
    throw std::invalid_argument("unknown conditioning mode: " + s);
}

std::string to_string(ConditioningMode m) {
    switch (m) {
        case ConditioningMode::dual_cross_attn: return "dual_cross_attn";
        case ConditioningMode::dual_concat: return "dual_concat";
        case ConditioningMode::semantic_only: return "semantic_only";
        case ConditioningMode::spatial_only: return "spatial_only";
    }
    return "?";
}

void DiTConfig::validate() const {
    if (patch_size < 1) throw std::invalid_argument("model: patch_size >= 1");
    if (depth < 1) throw std::invalid_argument("model: depth >= 1");
    if (hidden_dim % num_heads != 0)
        throw std::invalid_argument("model: hidden_dim must be divisible by num_heads");
    if (hidden_dim % 4 != 0)
        throw std::invalid_argument("model: hidden_dim must be divisible by 4");
}

ad::Var ada_ln_modulate(const ad::Var& tokens, const ad::Var& c_combined, const ad::Var& mlp_w,
                        const ad::Var& mlp_b) {
    const int64_t hd = tokens->value.shape.back();
    if (mlp_w->value.dim(1) != 2 * hd)
        throw std::invalid_argument("ada_ln_modulate: mlp must emit [gamma, beta]");
    auto mod = ad::linear(c_combined, mlp_w, mlp_b);  // [B, 2*hd]
    const int64_t B = mod->value.dim(0);
    auto gamma = ad::reshape(ad::slice_lastdim(mod, 0, hd), {B, 1, hd});
    auto beta = ad::reshape(ad::slice_lastdim(mod, hd, hd), {B, 1, hd});
    return ad::add(ad::mul(gamma, ad::layernorm(tokens)), beta);
}

ad::Var cross_attend(const ad::Var& queries, const ad::Var& spatial_tokens,
                     const CrossAttnWeights& w) {
    auto q = ad::linear(queries, w.wq, w.bq);
    auto k = ad::linear(spatial_tokens, w.wk, w.bk);
    auto v = ad::linear(spatial_tokens, w.wv, w.bv);
    auto o = ad::multi_head_attention(q, k, v, w.heads);
    return ad::linear(o, w.wo, w.bo);
}

namespace {

// Per-sublayer modulation triple (gamma, beta, gate) sliced from the block's
// modulation output and broadcast over tokens.
struct ModTriple {
    ad::Var gamma, beta, gate;
};

ModTriple slice_triple(const ad::Var& mod, int sub, int64_t hd) {
    const int64_t B = mod->value.dim(0);
    auto part = [&](int64_t j) {
        return ad::reshape(ad::slice_lastdim(mod, (sub * 3 + j) * hd, hd), {B, 1, hd});
    };
    return {part(0), part(1), part(2)};
}

ad::Var modulate(const ad::Var& x, const ad::Var& gamma, const ad::Var& beta) {
    return ad::add(ad::mul(gamma, ad::layernorm(x)), beta);
}

}  // namespace

DiTModel::DiTModel(DiTConfig cfg, uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    const int64_t hd = cfg_.hidden_dim;
    const int64_t pd_in = int64_t(cfg_.patch_size) * cfg_.patch_size * cfg_.input_channels();
    const int64_t pd_out = int64_t(cfg_.patch_size) * cfg_.patch_size * cfg_.latent_channels;

    params_.add("embed.w", nn::xavier_uniform(pd_in, hd, rng));
    params_.add("embed.b", Tensor::zeros({hd}));
    params_.add("temb.w0", nn::xavier_uniform(hd, hd, rng));
    params_.add("temb.b0", Tensor::zeros({hd}));
    params_.add("temb.w1", nn::xavier_uniform(hd, hd, rng));
    params_.add("temb.b1", Tensor::zeros({hd}));

    if (cfg_.uses_semantic()) {
        params_.add("cond.sem.proj.w", nn::xavier_uniform(cfg_.d_sem, hd, rng));
        params_.add("cond.sem.proj.b", Tensor::zeros({hd}));
    }
    params_.add("cond.sem.null", Tensor::randn({int64_t(cfg_.d_sem)}, rng, 0.02));
    if (cfg_.uses_cross_attn())
        tokenizer_ = std::make_unique<SpatialTokenizer>(params_, cfg_.patch_size,
                                                        cfg_.latent_channels, cfg_.hidden_dim,
                                                        rng());
    if (cfg_.uses_concat())
        params_.add("cond.spatial.null_map",
                    Tensor::randn({int64_t(cfg_.latent_channels)}, rng, 0.02));

    for (int i = 0; i < cfg_.depth; ++i) {
        const std::string p = "blk" + std::to_string(i) + ".";
        const int n_sub = cfg_.block_has_cross(i) ? 3 : 2;
        // Zero-init modulation weights; bias starts each gamma at 1, beta and
        // gate at 0 (identity blocks at initialization).
        params_.add(p + "mod.w", Tensor::zeros({hd, int64_t(n_sub) * 3 * hd}));
        Tensor mb({int64_t(n_sub) * 3 * hd});
        for (int s = 0; s < n_sub; ++s)
            for (int64_t j = 0; j < hd; ++j) mb[(s * 3 + 0) * hd + j] = 1.0;
        params_.add(p + "mod.b", mb);

        for (const char* nm : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"})
            params_.add(p + nm, nn::xavier_uniform(hd, hd, rng));
        for (const char* nm : {"attn.bq", "attn.bk", "attn.bv", "attn.bo"})
            params_.add(p + nm, Tensor::zeros({hd}));
        if (cfg_.block_has_cross(i)) {
            for (const char* nm : {"cross.wq", "cross.wk", "cross.wv", "cross.wo"})
                params_.add(p + nm, nn::xavier_uniform(hd, hd, rng));
            for (const char* nm : {"cross.bq", "cross.bk", "cross.bv", "cross.bo"})
                params_.add(p + nm, Tensor::zeros({hd}));
        }
        params_.add(p + "ffn.w0", nn::xavier_uniform(hd, 4 * hd, rng));
        params_.add(p + "ffn.b0", Tensor::zeros({4 * hd}));
        params_.add(p + "ffn.w1", nn::xavier_uniform(4 * hd, hd, rng));
        params_.add(p + "ffn.b1", Tensor::zeros({hd}));
    }

    params_.add("head.mod.w", Tensor::zeros({hd, 2 * hd}));
    Tensor hmb({2 * hd});
    for (int64_t j = 0; j < hd; ++j) hmb[j] = 1.0;
    params_.add("head.mod.b", hmb);
    params_.add("head.w", Tensor::zeros({hd, pd_out}));
    params_.add("head.b", Tensor::zeros({pd_out}));
}

ad::Var DiTModel::forward(const Tensor& z_t, const std::vector<int>& t,
                          const std::vector<ConditionBundle>& cond) const {
    if (z_t.rank() != 4) throw std::invalid_argument("denoise: z_t must be [B,h,w,C]");
    const int64_t B = z_t.dim(0), h = z_t.dim(1), w = z_t.dim(2);
    if (z_t.dim(3) != cfg_.latent_channels)
        throw std::invalid_argument("denoise: latent channel mismatch");
    if (int64_t(t.size()) != B || int64_t(cond.size()) != B)
        throw std::invalid_argument("denoise: batch size mismatch");
    const int p = cfg_.patch_size;
    if (h % p != 0 || w % p != 0)
        throw std::invalid_argument("denoise: latent dims not divisible by patch size");
    const int64_t hd = cfg_.hidden_dim;

    // Stack per-sample spatial latents and drop flags.
    std::vector<bool> spatial_dropped(static_cast<size_t>(B));
    Tensor spat({B, h, w, int64_t(cfg_.latent_channels)});
    const bool needs_spatial = cfg_.uses_cross_attn() || cfg_.uses_concat();
    for (int64_t b = 0; b < B; ++b) {
        spatial_dropped[size_t(b)] = cond[size_t(b)].spatial_dropped;
        if (needs_spatial && !cond[size_t(b)].spatial_dropped) {
            const Tensor& sl = cond[size_t(b)].spatial_latent;
            if (sl.shape != std::vector<int64_t>{h, w, int64_t(cfg_.latent_channels)})
                throw std::invalid_argument("denoise: spatial latent shape mismatch");
            std::copy(sl.data.begin(), sl.data.end(), spat.data.begin() + b * sl.numel());
        }
    }

    // Input tokens (optionally with channel-concatenated spatial latents).
    ad::Var z_in;
    if (cfg_.uses_concat()) {
        Tensor mask({B, 1, 1, 1}), inv({B, 1, 1, 1});
        for (int64_t b = 0; b < B; ++b) {
            mask[b] = spatial_dropped[size_t(b)] ? 1.0 : 0.0;
            inv[b] = 1.0 - mask[b];
        }
        auto nulls = ad::broadcast_to(
            ad::reshape(params_.get("cond.spatial.null_map"),
                        {1, 1, 1, int64_t(cfg_.latent_channels)}),
            {B, h, w, int64_t(cfg_.latent_channels)});
        auto spat_eff = ad::add(ad::mul(ad::constant(inv), ad::constant(spat)),
                                ad::mul(ad::constant(mask), nulls));
        z_in = ad::concat_lastdim(ad::constant(z_t), spat_eff);
    } else {
        z_in = ad::constant(z_t);
    }
    auto x = ad::linear(ad::patchify(z_in, p), params_.get("embed.w"), params_.get("embed.b"));
    Tensor pos = nn::pos_embed_2d(h / p, w / p, hd);
    x = ad::add(x, ad::constant(pos.reshaped({1, pos.dim(0), pos.dim(1)})));
    const int64_t N = x->value.dim(1);

    // Timestep embedding.
    Tensor temb_base({B, hd});
    for (int64_t b = 0; b < B; ++b) {
        Tensor e = nn::timestep_embedding(double(t[size_t(b)]), hd);
        std::copy(e.data.begin(), e.data.end(), temb_base.data.begin() + b * hd);
    }
    auto c = ad::linear(ad::silu(ad::linear(ad::constant(temb_base), params_.get("temb.w0"),
                                            params_.get("temb.b0"))),
                        params_.get("temb.w1"), params_.get("temb.b1"));

    // Semantic stream: blend real embeddings with the learned null.
    if (cfg_.uses_semantic()) {
        Tensor sem({B, int64_t(cfg_.d_sem)});
        Tensor mask({B, 1}), inv({B, 1});
        for (int64_t b = 0; b < B; ++b) {
            mask[b] = cond[size_t(b)].sem_dropped ? 1.0 : 0.0;
            inv[b] = 1.0 - mask[b];
            if (!cond[size_t(b)].sem_dropped) {
                const Tensor& cs = cond[size_t(b)].c_sem;
                if (cs.numel() != cfg_.d_sem)
                    throw std::invalid_argument("denoise: semantic embedding width mismatch");
                std::copy(cs.data.begin(), cs.data.end(), sem.data.begin() + b * cfg_.d_sem);
            }
        }
        auto nulls = ad::broadcast_to(
            ad::reshape(params_.get("cond.sem.null"), {1, int64_t(cfg_.d_sem)}),
            {B, int64_t(cfg_.d_sem)});
        auto sem_eff = ad::add(ad::mul(ad::constant(inv), ad::constant(sem)),
                               ad::mul(ad::constant(mask), nulls));
        c = ad::add(c, ad::linear(sem_eff, params_.get("cond.sem.proj.w"),
                                  params_.get("cond.sem.proj.b")));
    }
    auto c_act = ad::silu(c);

    // Spatial condition tokens for cross-attention.
    ad::Var spatial_tokens;
    if (cfg_.uses_cross_attn())
        spatial_tokens = tokenizer_->tokens(ad::constant(spat), spatial_dropped);

    for (int i = 0; i < cfg_.depth; ++i) {
        const std::string pfx = "blk" + std::to_string(i) + ".";
        const bool has_cross = cfg_.block_has_cross(i);
        auto mod = ad::linear(c_act, params_.get(pfx + "mod.w"), params_.get(pfx + "mod.b"));

        auto m1 = slice_triple(mod, 0, hd);
        auto a = modulate(x, m1.gamma, m1.beta);
        auto attn = ad::multi_head_attention(
            ad::linear(a, params_.get(pfx + "attn.wq"), params_.get(pfx + "attn.bq")),
            ad::linear(a, params_.get(pfx + "attn.wk"), params_.get(pfx + "attn.bk")),
            ad::linear(a, params_.get(pfx + "attn.wv"), params_.get(pfx + "attn.bv")),
            cfg_.num_heads);
        x = ad::add(x, ad::mul(m1.gate,
                               ad::linear(attn, params_.get(pfx + "attn.wo"),
                                          params_.get(pfx + "attn.bo"))));
        int sub = 1;
        if (has_cross) {
            auto m2 = slice_triple(mod, sub++, hd);
            CrossAttnWeights cw{params_.get(pfx + "cross.wq"), params_.get(pfx + "cross.bq"),
                                params_.get(pfx + "cross.wk"), params_.get(pfx + "cross.bk"),
                                params_.get(pfx + "cross.wv"), params_.get(pfx + "cross.bv"),
                                params_.get(pfx + "cross.wo"), params_.get(pfx + "cross.bo"),
                                cfg_.num_heads};
            auto o = cross_attend(modulate(x, m2.gamma, m2.beta), spatial_tokens, cw);
            x = ad::add(x, ad::mul(m2.gate, o));
        }
        auto m3 = slice_triple(mod, sub, hd);
        auto f = modulate(x, m3.gamma, m3.beta);
        f = ad::gelu(ad::linear(f, params_.get(pfx + "ffn.w0"), params_.get(pfx + "ffn.b0")));
        f = ad::linear(f, params_.get(pfx + "ffn.w1"), params_.get(pfx + "ffn.b1"));
        x = ad::add(x, ad::mul(m3.gate, f));
        (void)N;
    }

    auto out = ada_ln_modulate(x, c_act, params_.get("head.mod.w"), params_.get("head.mod.b"));
    out = ad::linear(out, params_.get("head.w"), params_.get("head.b"));
    return ad::unpatchify(out, h, w, cfg_.latent_channels, p);
}

Tensor DiTModel::denoise(const Tensor& z_t, int t, const ConditionBundle& cond) const {
    if (z_t.rank() != 3) throw std::invalid_argument("denoise: expected [h,w,C]");
    Tensor zb = z_t.reshaped({1, z_t.dim(0), z_t.dim(1), z_t.dim(2)});
    auto out = forward(zb, {t}, {cond});
    return out->value.reshaped({z_t.dim(0), z_t.dim(1), z_t.dim(2)});
}

ConditionBundle DiTModel::null_bundle(int64_t latent_h, int64_t latent_w) const {
    ConditionBundle b;
    b.c_sem = null_sem_value();
    b.spatial_latent = Tensor::zeros({latent_h, latent_w, int64_t(cfg_.latent_channels)});
    b.sem_dropped = true;
    b.spatial_dropped = true;
    return b;
}

}  // namespace vstain
