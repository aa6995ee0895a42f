#include "vstain/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <stdexcept>

#include <unistd.h>

#include "vstain/objective.hpp"

namespace fs = std::filesystem;

namespace vstain {

uint64_t step_seed(uint64_t seed, int64_t step) {
    return seed ^ (0x9e3779b97f4a7c15ULL * uint64_t(step + 1));
}

uint64_t image_seed(uint64_t seed, const std::string& filename) {
    return seed + fnv1a64(filename);
}

Pipeline make_pipeline(const RunConfig& cfg) {
    cfg.validate();
    Pipeline p;
    p.cfg = cfg;
    p.codec = make_codec(cfg.codec, step_seed(cfg.opt.seed, -1000));
    p.sem = std::make_unique<RandomProjectionEncoder>(cfg.model.d_sem,
                                                      step_seed(cfg.opt.seed, -2000));
    p.model = std::make_unique<DiTModel>(cfg.model, step_seed(cfg.opt.seed, -3000));
    p.sched = make_scaled_linear(cfg.schedule.T, cfg.schedule.beta_start, cfg.schedule.beta_end);
    return p;
}

namespace {

// The codec's fitted latent scale rides along in the model's parameter store
// as a frozen 1-element tensor so checkpointing stays a single-store affair.
constexpr const char* kScaleName = "codec.latent_scale";

void sync_scale_into_store(Pipeline& p) {
    Tensor s({1});
    s[0] = p.codec->scale_fitted ? p.codec->latent_scale : 0.0;  // 0 encodes "not fitted"
    if (!p.model->params().has(kScaleName)) {
        auto var = p.model->params().add(kScaleName, s);
        var->requires_grad = false;
        var->needs_grad = false;
    } else {
        p.model->params().get(kScaleName)->value = s;
    }
}

void sync_scale_from_store(Pipeline& p) {
    if (!p.model->params().has(kScaleName)) return;
    const double s = p.model->params().get(kScaleName)->value[0];
    p.codec->scale_fitted = s != 0.0;
    p.codec->latent_scale = p.codec->scale_fitted ? s : 1.0;
}

// Codec parameters are frozen after the pre-fit stage; they are checkpointed
// under a reserved prefix alongside the denoiser parameters.
void merge_codec_params(Pipeline& p) {
    auto* cp = p.codec->params();
    if (cp == nullptr) return;
    for (const auto& [name, var] : cp->entries()) {
        const std::string merged = "codec." + name;
        if (!p.model->params().has(merged)) {
            auto alias = p.model->params().add(merged, var->value);
            alias->requires_grad = false;
            alias->needs_grad = false;
        } else {
            p.model->params().get(merged)->value = var->value;
        }
    }
}

void restore_codec_params(Pipeline& p) {
    auto* cp = p.codec->params();
    if (cp == nullptr) return;
    for (auto& [name, var] : cp->entries())
        var->value = p.model->params().get("codec." + name)->value;
}

struct LockFile {
    fs::path path;
    explicit LockFile(const fs::path& dir) : path(dir / ".lock") {
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (fs::exists(path))
            throw std::runtime_error("train: " + path.string() +
                                     " exists; another run owns this directory");
        std::ofstream(path) << "pid " << ::getpid() << "\n";
    }
    ~LockFile() {
        std::error_code ec;
        fs::remove(path, ec);
    }
};

struct CachedPair {
    Tensor z0;              // scaled IHC latent [h,w,C]
    ConditionBundle cond;   // semantic vector + scaled H&E spatial latent
};

}  // namespace

void save_pipeline(const Pipeline& p, const std::string& path, int64_t step,
                   const nn::AdamW* opt, const nn::Ema* ema) {
    auto& mut = const_cast<Pipeline&>(p);
    merge_codec_params(mut);
    sync_scale_into_store(mut);
    save_checkpoint(path, p.model->params(), p.cfg, step, opt, ema);
}

CheckpointInfo load_pipeline(Pipeline& p, const std::string& path, bool ignore_fingerprint,
                             nn::AdamW* opt, nn::Ema* ema) {
    merge_codec_params(p);     // ensure the store has the codec slots
    sync_scale_into_store(p);  // and the scale slot, before loading into them
    auto info = load_checkpoint(path, p.model->params(), p.cfg, ignore_fingerprint, opt, ema);
    restore_codec_params(p);
    sync_scale_from_store(p);
    return info;
}

TrainResult train_run(Pipeline& p, const std::vector<synth::SlidePair>& pairs,
                      const TrainOptions& opts) {
    if (pairs.empty()) throw std::runtime_error("train: empty dataset");
    const RunConfig& cfg = p.cfg;
    fs::path out = opts.out_dir.empty() ? fs::path(".") : fs::path(opts.out_dir);
    LockFile lock(out);

    if (opts.resume_from.empty()) {
        if (auto* toy = dynamic_cast<ToyAutoencoderCodec*>(p.codec.get());
            toy != nullptr && cfg.opt.codec_fit_steps > 0) {
            std::vector<Tensor> imgs;
            for (const auto& pr : pairs) {
                imgs.push_back(pr.he);
                imgs.push_back(pr.ihc);
            }
            auto fit = toy->fit(imgs, cfg.opt.codec_fit_steps, cfg.opt.batch_size, 1e-3,
                                step_seed(cfg.opt.seed, -4000));
            if (!opts.quiet)
                std::cerr << "codec fit: " << fit.first_loss << " -> " << fit.final_loss << "\n";
        }
        std::vector<Tensor> latents;
        for (size_t i = 0; latents.size() < 100; i = (i + 1) % pairs.size()) {
            latents.push_back(p.codec->encode_raw(pairs[i].he));
            latents.push_back(p.codec->encode_raw(pairs[i].ihc));
        }
        p.codec->latent_scale = fit_latent_scale(latents);
        p.codec->scale_fitted = true;
    }

    // Codec slots enter the store before the optimizer is built so moment
    // vectors line up with the store; frozen slots never receive gradients,
    // which the optimizer treats as "leave untouched".
    merge_codec_params(p);
    sync_scale_into_store(p);
    nn::AdamW opt(p.model->params(),
                  {cfg.opt.lr, 0.9, 0.999, 1e-8, cfg.opt.weight_decay});
    std::unique_ptr<nn::Ema> ema;
    if (cfg.opt.ema_decay > 0.0)
        ema = std::make_unique<nn::Ema>(p.model->params(), cfg.opt.ema_decay);

    int64_t start = 0;
    if (!opts.resume_from.empty()) {
        auto info = load_pipeline(p, opts.resume_from, opts.ignore_fingerprint, &opt, ema.get());
        start = info.step;
    }

    // Per-pair encodings are deterministic once the codec is frozen.
    std::vector<CachedPair> cache(pairs.size());
    for (size_t i = 0; i < pairs.size(); ++i) {
        cache[i].z0 = encode(pairs[i].ihc, *p.codec).data;
        cache[i].cond = make_bundle(pairs[i].he, *p.sem, *p.codec);
    }
    const int64_t h = cache[0].z0.dim(0), w = cache[0].z0.dim(1), C = cache[0].z0.dim(2);
    const int B = cfg.opt.batch_size;
    const Tensor null_sem = p.model->null_sem_value();

    std::ofstream log(out / "loss.csv", start == 0 ? std::ios::trunc : std::ios::app);
    if (start == 0) log << "step,loss\n";

    TrainResult result;
    const std::string ckpt = (out / "checkpoint.vsckpt").string();
    for (int64_t s = start; s < cfg.opt.steps; ++s) {
        const uint64_t bseed = step_seed(cfg.opt.seed, s);
        std::mt19937_64 rng(bseed);
        std::uniform_int_distribution<size_t> upair(0, pairs.size() - 1);
        std::uniform_int_distribution<int> ut(0, p.sched.T - 1);
        std::normal_distribution<double> gauss(0.0, 1.0);

        Tensor z_t({B, h, w, C}), eps_true({B, h, w, C});
        std::vector<int> ts(static_cast<size_t>(B));
        std::vector<ConditionBundle> conds;
        conds.reserve(size_t(B));
        for (int b = 0; b < B; ++b) {
            const auto& cp = cache[upair(rng)];
            ts[size_t(b)] = ut(rng);
            Tensor eps(cp.z0.shape);
            for (auto& v : eps.data) v = gauss(rng);
            const Tensor zt = forward_diffuse(cp.z0, ts[size_t(b)], eps, p.sched);
            std::copy(zt.data.begin(), zt.data.end(), z_t.data.begin() + b * h * w * C);
            std::copy(eps.data.begin(), eps.data.end(), eps_true.data.begin() + b * h * w * C);
            conds.push_back(apply_cfg_dropout(cp.cond, cfg.cond_drop_p, rng, null_sem));
        }

        ad::Var pred = p.model->forward(z_t, ts, conds);
        ad::Var loss = hybrid_loss_graph(eps_true, pred, cfg.loss);
        const double lv = loss->value[0];
        if (!std::isfinite(lv))
            throw NumericError("train: non-finite loss at step " + std::to_string(s) +
                               " (batch seed " + std::to_string(bseed) + ")");
        p.model->params().zero_grads();
        ad::backward(loss);
        opt.step();
        if (ema) ema->update(p.model->params());

        if (s == start) result.step0_loss = lv;
        result.final_loss = lv;
        result.losses.push_back(lv);
        log << s << "," << lv << "\n";
        if (!opts.quiet && (s % 100 == 0 || s + 1 == cfg.opt.steps))
            std::cerr << "step " << s << " loss " << lv << "\n";
        if (cfg.opt.checkpoint_every > 0 && (s + 1) % cfg.opt.checkpoint_every == 0)
            save_pipeline(p, ckpt, s + 1, &opt, ema.get());
    }
    save_pipeline(p, ckpt, cfg.opt.steps, &opt, ema.get());
    result.checkpoint_path = ckpt;
    return result;
}

}  // namespace vstain
