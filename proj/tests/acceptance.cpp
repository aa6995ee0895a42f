// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Each criterion is self-contained and pins its tolerances
// inline; runtime limits are part of the pass condition.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "vstain/metrics.hpp"
#include "vstain/objective.hpp"
#include "vstain/sampler.hpp"
#include "vstain/schedule.hpp"
#include "vstain/synthdata.hpp"
#include "vstain/trainer.hpp"

using namespace vstain;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Criterion {
    int id;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

std::vector<Criterion> g_results;
std::vector<int> g_selected;  // empty: run everything

template <typename Fn>
void run_criterion(int id, const std::string& name, double time_limit_s, Fn fn) {
    if (!g_selected.empty() &&
        std::find(g_selected.begin(), g_selected.end(), id) == g_selected.end())
        return;
    Criterion c{id, name};
    const auto t0 = Clock::now();
    try {
        std::ostringstream detail;
        c.pass = fn(detail);
        c.detail = detail.str();
    } catch (const std::exception& e) {
        c.pass = false;
        c.detail = std::string("exception: ") + e.what();
    }
    c.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    if (c.pass && time_limit_s > 0.0 && c.seconds > time_limit_s) {
        c.pass = false;
        c.detail += " [exceeded time limit of " + std::to_string(time_limit_s) + " s]";
    }
    std::printf("[%d] %-28s %s  (%.1f s)  %s\n", c.id, c.name.c_str(),
                c.pass ? "PASS" : "FAIL", c.seconds, c.detail.c_str());
    std::fflush(stdout);
    g_results.push_back(std::move(c));
}

// ---------- shared helpers ----------

fs::path work_dir() {
    fs::path p = fs::temp_directory_path() / "vstain_acceptance";
    fs::create_directories(p);
    return p;
}

// Naive per-window SSIM/SCM oracle on the luma plane (valid positions,
// separable window weights, classic 8-bit constants).
struct OracleOut {
    double l = 0, c = 0, s = 0, ssim = 0, scm = 0;
};

OracleOut metric_oracle(const Tensor& a_img, const Tensor& b_img,
                        const metrics::WindowSpec& w) {
    constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
    constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);
    constexpr double kC3 = kC2 / 2.0;
    Tensor a = metrics::to_luma8(a_img), b = metrics::to_luma8(b_img);
    const int64_t H = a.dim(0), W = a.dim(1), k = w.size;
    std::vector<double> win(size_t(k), 1.0 / double(k));
    if (w.kind == metrics::WindowSpec::Kind::gaussian) {
        const double c0 = (double(k) - 1.0) / 2.0;
        double sum = 0.0;
        for (int i = 0; i < k; ++i) {
            win[size_t(i)] = std::exp(-(i - c0) * (i - c0) / (2.0 * w.sigma * w.sigma));
            sum += win[size_t(i)];
        }
        for (auto& v : win) v /= sum;
    }
    OracleOut r;
    int64_t n = 0;
    for (int64_t i = 0; i + k <= H; ++i)
        for (int64_t j = 0; j + k <= W; ++j) {
            double ma = 0, mb = 0, ea2 = 0, eb2 = 0, eab = 0;
            for (int64_t u = 0; u < k; ++u)
                for (int64_t v = 0; v < k; ++v) {
                    const double wt = win[size_t(u)] * win[size_t(v)];
                    const double av = a[(i + u) * W + (j + v)];
                    const double bv = b[(i + u) * W + (j + v)];
                    ma += wt * av;
                    mb += wt * bv;
                    ea2 += wt * av * av;
                    eb2 += wt * bv * bv;
                    eab += wt * av * bv;
                }
            const double va = std::max(0.0, ea2 - ma * ma);
            const double vb = std::max(0.0, eb2 - mb * mb);
            const double cov = eab - ma * mb;
            const double sa = std::sqrt(va), sb = std::sqrt(vb);
            const double l = (2 * ma * mb + kC1) / (ma * ma + mb * mb + kC1);
            const double c = (2 * sa * sb + kC2) / (sa * sa + sb * sb + kC2);
            const double s = (cov + kC3) / (sa * sb + kC3);
            r.l += l;
            r.c += c;
            r.s += s;
            r.ssim += l * c * s;  // per-window decomposition identity
            r.scm += s;
            ++n;
        }
    const double dn = double(n);
    r.l /= dn;
    r.c /= dn;
    r.s /= dn;
    r.ssim /= dn;
    r.scm /= dn;
    return r;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / double(v.size());
}

// ---------- criterion 1 ----------

bool criterion_schedule(std::ostringstream& out) {
    NoiseSchedule sched = make_scaled_linear(1000, 1e-4, 0.02);
    if (sched.betas.front() != 1e-4 || sched.betas.back() != 0.02) {
        out << "beta endpoints not exact";
        return false;
    }
    for (size_t t = 1; t < sched.alpha_bars.size(); ++t)
        if (!(sched.alpha_bars[t] < sched.alpha_bars[t - 1])) {
            out << "alpha_bar not strictly decreasing at t=" << t;
            return false;
        }

    // Closed-form forward_diffuse vs the iterated single-step process:
    // pooled normalized residuals (x_t - sqrt(ab) x0)/sqrt(1-ab) from both
    // methods must agree in mean and variance within 3 sigma of the
    // Monte-Carlo estimator noise (10^4 draws of a 4x4x4 tensor).
    std::mt19937_64 rng(20260826);
    Tensor x0 = Tensor::rand_uniform({4, 4, 4}, rng, -1.0, 1.0);
    const int64_t E = x0.numel();
    const int draws = 10000;
    std::normal_distribution<double> gauss(0.0, 1.0);
    double worst_z = 0.0;
    for (int t : {0, 49, 199}) {
        const double ab = sched.alpha_bars[size_t(t)];
        const double sab = std::sqrt(ab), snab = std::sqrt(1.0 - ab);
        double cs = 0, cs2 = 0, is = 0, is2 = 0;
        for (int d = 0; d < draws; ++d) {
            Tensor eps(x0.shape);
            for (auto& v : eps.data) v = gauss(rng);
            Tensor xc = forward_diffuse(x0, t, eps, sched);
            for (int64_t i = 0; i < E; ++i) {
                const double r = (xc[i] - sab * x0[i]) / snab;
                cs += r;
                cs2 += r * r;
            }
            Tensor x = x0;
            for (int k = 0; k <= t; ++k) {
                const double bk = sched.betas[size_t(k)];
                const double a = std::sqrt(1.0 - bk), b = std::sqrt(bk);
                for (auto& v : x.data) v = a * v + b * gauss(rng);
            }
            for (int64_t i = 0; i < E; ++i) {
                const double r = (x[i] - sab * x0[i]) / snab;
                is += r;
                is2 += r * r;
            }
        }
        const double N = double(draws) * double(E);
        const double mc = cs / N, mi = is / N;
        const double vc = cs2 / N - mc * mc, vi = is2 / N - mi * mi;
        // Mean difference: var of each mean is ~1/N; variance difference:
        // var of each sample variance is ~2/N.
        const double zm = std::fabs(mc - mi) / std::sqrt(2.0 / N);
        const double zv = std::fabs(vc - vi) / std::sqrt(4.0 / N);
        worst_z = std::max({worst_z, zm, zv});
        if (zm > 3.0 || zv > 3.0) {
            out << "t=" << t << " mean z=" << zm << " var z=" << zv << " exceeds 3 sigma";
            return false;
        }
    }
    out << "endpoints exact, alpha_bar strictly decreasing, worst |z|=" << worst_z;
    return true;
}

// ---------- criterion 2 ----------

bool criterion_cfg(std::ostringstream& out) {
    std::mt19937_64 rng(11);
    Tensor u = Tensor::randn({8, 8}, rng), c = Tensor::randn({8, 8}, rng);
    Tensor s0 = cfg_combine(u, c, 0.0), s1 = cfg_combine(u, c, 1.0);
    double d1 = 0.0;
    for (int64_t i = 0; i < u.numel(); ++i) {
        if (s0[i] != u[i]) {
            out << "scale 0 is not exactly the unconditional branch";
            return false;
        }
        d1 = std::max(d1, std::fabs(s1[i] - c[i]));
    }
    if (d1 > 1e-12) {  // u + 1*(c-u) == c up to one rounding step
        out << "scale 1 deviates from the conditional branch by " << d1;
        return false;
    }

    // Full sampler at scale 1 vs a single-branch oracle: T=50 schedule,
    // 16x16x4 latents, full-schedule sampling, identical RNG stream.
    DiTConfig mc;
    mc.patch_size = 2;
    mc.hidden_dim = 32;
    mc.depth = 2;
    mc.num_heads = 2;
    mc.d_sem = 16;
    mc.latent_channels = 4;
    DiTModel model(mc, 17);
    for (auto& [name, p] : model.params().entries())
        for (auto& v : p->value.data) v += 0.01;  // leave the zero-init state
    const int T = 50;
    NoiseSchedule sched = make_scaled_linear(T, 1e-4, 0.02);
    ConditionBundle cond;
    cond.c_sem = Tensor::randn({16}, rng);
    cond.spatial_latent = Tensor::randn({16, 16, 4}, rng);
    GuidanceConfig g;
    g.scale = 1.0;
    g.seed = 23;
    g.steps = 0;
    Tensor got = sample_latent(model, cond, sched, g, 16, 16);

    std::mt19937_64 orng(g.seed);
    Tensor z = Tensor::randn({16, 16, 4}, orng);
    for (int t = T - 1; t >= 0; --t) {
        Tensor eps = model.denoise(z, t, cond);
        Tensor noise = t == 0 ? Tensor::zeros(z.shape) : Tensor::randn(z.shape, orng);
        z = posterior_step(z, eps, t, sched, noise);
    }
    double dmax = 0.0;
    for (int64_t i = 0; i < z.numel(); ++i) dmax = std::max(dmax, std::fabs(got[i] - z[i]));
    if (dmax > 1e-5) {
        out << "scale-1 sampler deviates from single-branch oracle by " << dmax;
        return false;
    }
    out << "algebra exact, sampler vs oracle max |diff|=" << dmax;
    return true;
}

// ---------- criterion 3 ----------

bool criterion_loss(std::ostringstream& out) {
    std::mt19937_64 rng(31);
    for (int rep = 0; rep < 5; ++rep) {
        Tensor a = Tensor::randn({3, 5, 7}, rng), b = Tensor::randn({3, 5, 7}, rng);
        double mse = 0, mae = 0;
        for (int64_t i = 0; i < a.numel(); ++i) {
            const double d = a[i] - b[i];
            mse += d * d;
            mae += std::fabs(d);
        }
        mse /= double(a.numel());
        mae /= double(a.numel());
        const double hyb = hybrid_loss(a, b, {0.7, 0.3});
        if (std::fabs(hyb - (0.7 * mse + 0.3 * mae)) > 1e-12 ||
            std::fabs(hybrid_loss(a, b, {1.0, 0.0}) - mse) > 1e-12 ||
            std::fabs(hybrid_loss(a, b, {0.0, 1.0}) - mae) > 1e-12) {
            out << "hybrid_loss deviates from the scalar-loop oracle";
            return false;
        }
    }

    // A freshly constructed model predicts exactly zero (zero-init head).
    DiTConfig mc;
    mc.hidden_dim = 32;
    mc.depth = 2;
    mc.num_heads = 2;
    mc.d_sem = 16;
    DiTModel model(mc, 5);
    ConditionBundle cond;
    cond.c_sem = Tensor::randn({16}, rng);
    cond.spatial_latent = Tensor::randn({8, 8, 4}, rng);
    Tensor zt = Tensor::randn({8, 8, 4}, rng);
    Tensor pred = model.denoise(zt, 13, cond);
    for (int64_t i = 0; i < pred.numel(); ++i)
        if (pred[i] != 0.0) {
            out << "fresh model output is not identically zero";
            return false;
        }

    // Expected step-0 loss of the zero network on standard-normal noise:
    // 0.7 E[eps^2] + 0.3 E[|eps|] = 0.7 + 0.3 sqrt(2/pi). 10^6-sample MC.
    const Tensor zero = Tensor::zeros({1000});
    double acc = 0.0;
    const int chunks = 1000;
    for (int kk = 0; kk < chunks; ++kk) {
        Tensor eps = Tensor::randn({1000}, rng);
        acc += hybrid_loss(eps, zero, {0.7, 0.3});
    }
    acc /= double(chunks);
    const double expect = 0.7 + 0.3 * std::sqrt(2.0 / M_PI);
    const double rel = std::fabs(acc - expect) / expect;
    if (rel > 0.01) {
        out << "MC step-0 loss " << acc << " vs " << expect << " rel err " << rel;
        return false;
    }
    out << "oracle match, MC step-0 loss rel err " << rel;
    return true;
}

// ---------- criterion 4 ----------

bool criterion_gradients(std::ostringstream& out) {
    DiTConfig mc;
    mc.patch_size = 2;
    mc.hidden_dim = 16;
    mc.depth = 1;
    mc.num_heads = 2;
    mc.d_sem = 8;
    mc.latent_channels = 4;
    DiTModel model(mc, 41);
    std::mt19937_64 rng(43);
    for (auto& [name, p] : model.params().entries())
        for (auto& v : p->value.data) v += 0.02 * (std::uniform_real_distribution<double>(-1, 1)(rng));

    NoiseSchedule sched = make_scaled_linear(50, 1e-4, 0.02);
    const int B = 2;
    Tensor z0a = Tensor::randn({4, 4, 4}, rng), z0b = Tensor::randn({4, 4, 4}, rng);
    Tensor epsa = Tensor::randn({4, 4, 4}, rng), epsb = Tensor::randn({4, 4, 4}, rng);
    std::vector<int> ts = {7, 31};
    Tensor zta = forward_diffuse(z0a, ts[0], epsa, sched);
    Tensor ztb = forward_diffuse(z0b, ts[1], epsb, sched);
    Tensor z_t({B, 4, 4, 4}), eps_true({B, 4, 4, 4});
    std::copy(zta.data.begin(), zta.data.end(), z_t.data.begin());
    std::copy(ztb.data.begin(), ztb.data.end(), z_t.data.begin() + 64);
    std::copy(epsa.data.begin(), epsa.data.end(), eps_true.data.begin());
    std::copy(epsb.data.begin(), epsb.data.end(), eps_true.data.begin() + 64);
    // One conditioned sample and one fully dropped sample, so the null
    // condition parameters participate in the loss as in real training.
    std::vector<ConditionBundle> conds;
    ConditionBundle real;
    real.c_sem = Tensor::randn({8}, rng);
    real.spatial_latent = Tensor::randn({4, 4, 4}, rng);
    conds.push_back(real);
    conds.push_back(model.null_bundle(4, 4));
    const LossWeights w{0.7, 0.3};

    auto loss_value = [&]() {
        ad::Var loss = hybrid_loss_graph(eps_true, model.forward(z_t, ts, conds), w);
        return loss->value[0];
    };
    ad::Var loss = hybrid_loss_graph(eps_true, model.forward(z_t, ts, conds), w);
    model.params().zero_grads();
    ad::backward(loss);

    int checked = 0, skipped = 0;
    double worst = 0.0;
    std::string worst_name;
    for (auto& [name, p] : model.params().entries()) {
        const int64_t n = p->value.numel();
        std::vector<int64_t> idxs = {0, n / 2, n - 1};
        std::sort(idxs.begin(), idxs.end());
        idxs.erase(std::unique(idxs.begin(), idxs.end()), idxs.end());
        for (int64_t i : idxs) {
            const double g = p->grad.data.empty() ? 0.0 : p->grad[i];
            double rel = 0.0;
            bool ok = false;
            for (double h : {1e-5, 1e-6, 1e-7}) {  // retry smaller h near L1 ties
                const double keep = p->value[i];
                p->value.data[size_t(i)] = keep + h;
                const double lp = loss_value();
                p->value.data[size_t(i)] = keep - h;
                const double lm = loss_value();
                p->value.data[size_t(i)] = keep;
                const double fd = (lp - lm) / (2.0 * h);
                if (std::fabs(fd) < 1e-10 && std::fabs(g) < 1e-10) {
                    ok = true;  // parameter does not influence this batch
                    ++skipped;
                    break;
                }
                rel = std::fabs(fd - g) / std::max({std::fabs(fd), std::fabs(g), 1e-8});
                if (rel < 1e-3) {
                    ok = true;
                    break;
                }
            }
            if (!ok) {
                out << name << "[" << i << "] rel err " << rel;
                return false;
            }
            if (rel > worst) {
                worst = rel;
                worst_name = name;
            }
            ++checked;
        }
    }
    out << checked << " elements across " << model.params().entries().size()
        << " parameter groups, worst rel err " << worst << " (" << worst_name << "), "
        << skipped << " inactive";
    return true;
}

// ---------- criterion 5 ----------

bool criterion_metrics(std::ostringstream& out) {
    std::mt19937_64 rng(53);
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        Tensor a = Tensor::rand_uniform({32, 32, 3}, rng, -1.0, 1.0);
        Tensor b = Tensor::rand_uniform({32, 32, 3}, rng, -1.0, 1.0);
        metrics::WindowSpec w;
        if (rep % 2 == 1) w.kind = metrics::WindowSpec::Kind::uniform;
        OracleOut o = metric_oracle(a, b, w);
        metrics::SsimComponents got = metrics::ssim_decomposed(a, b, w);
        const double gscm = metrics::scm(a, b, w);
        worst = std::max({worst, std::fabs(got.ssim - o.ssim), std::fabs(gscm - o.scm),
                          std::fabs(got.luminance - o.l), std::fabs(got.contrast - o.c),
                          std::fabs(got.structure - o.s)});
        // Decomposition identity: the reported SSIM is the mean over windows
        // of the per-window product l*c*s (oracle accumulates exactly that).
        if (std::fabs(got.ssim - o.ssim) > 1e-9) {
            out << "ssim != mean of per-window l*c*s, diff " << std::fabs(got.ssim - o.ssim);
            return false;
        }
    }
    if (worst > 1e-9) {
        out << "oracle deviation " << worst;
        return false;
    }

    metrics::WindowSpec w;
    // Affine intensity invariance; the affine image must stay inside [-1,1]
    // so the 8-bit mapping remains affine too.
    Tensor x = Tensor::rand_uniform({32, 32, 3}, rng, -0.45, 0.44);
    Tensor y = x;
    for (auto& v : y.data) v = 2.0 * v + 0.1;
    const double aff = std::fabs(metrics::scm(x, y, w) - 1.0);
    if (aff > 1e-3) {
        out << "affine invariance violated: |scm-1| = " << aff;
        return false;
    }

    // Anti-correlation on zero-mean noise: gray +/-1 noise keeps the window
    // variance far above C3 so the structure term can reach -0.99.
    Tensor n = Tensor::zeros({32, 32, 3});
    std::bernoulli_distribution coin(0.5);
    for (int64_t px = 0; px < 32 * 32; ++px) {
        const double v = coin(rng) ? 1.0 : -1.0;
        for (int64_t ch = 0; ch < 3; ++ch) n.data[size_t(px * 3 + ch)] = v;
    }
    Tensor neg = n;
    for (auto& v : neg.data) v = -v;
    const double anti = metrics::scm(n, neg, w);
    if (!(anti <= -0.99)) {
        out << "anti-correlation scm(x,-x) = " << anti << " > -0.99";
        return false;
    }
    out << "oracle max |diff|=" << worst << ", affine |scm-1|=" << aff << ", scm(x,-x)="
        << anti;
    return true;
}

// ---------- criterion 6 ----------

bool criterion_luminance_bias(std::ostringstream& out) {
    synth::GeneratorSpec spec;
    spec.image_size = 64;
    spec.background_fraction = 0.35;
    spec.nuclei_min = 10;
    spec.nuclei_max = 24;
    metrics::WindowSpec w;
    std::vector<double> gaps;
    for (int i = 0; i < 50; ++i) {
        spec.seed = 9000 + uint64_t(i);
        synth::SlidePair pair = synth::generate_pair(spec);
        auto [ssim, scm_v] = metrics::luminance_bias_demo(pair.he, w);
        gaps.push_back(ssim - scm_v);
    }
    const double gap = mean_of(gaps);
    out << "mean ssim-scm gap " << gap << " over 50 slides";
    return gap >= 0.2;
}

// ---------- criterion 7 ----------

struct ToyRun {
    RunConfig cfg;
    std::vector<synth::SlidePair> test_pairs;
    std::string checkpoint;
};

std::vector<synth::SlidePair> balanced_test_set(uint64_t seed, int per_label, int image_size) {
    synth::GeneratorSpec spec;
    spec.image_size = image_size;
    std::map<int, int> got;
    std::vector<synth::SlidePair> picked;
    for (uint64_t s = seed; int(picked.size()) < 4 * per_label; ++s) {
        spec.seed = s;
        synth::SlidePair p = synth::generate_pair(spec);
        if (got[int(p.label)] < per_label) {
            ++got[int(p.label)];
            p.id += ".png";
            picked.push_back(std::move(p));
        }
    }
    return picked;
}

double mean_scm_against_truth(const std::vector<synth::SlidePair>& tests,
                              const Pipeline& p, const GuidanceConfig& base_g,
                              uint64_t sampling_seed,
                              std::map<std::string, std::vector<double>>* brown_by_label) {
    metrics::WindowSpec w;
    std::vector<double> scms;
    for (const auto& tp : tests) {
        GuidanceConfig g = base_g;
        g.seed = image_seed(sampling_seed, tp.id);
        Tensor gen = translate(tp.he, *p.model, *p.sem, *p.codec, p.sched, g);
        scms.push_back(metrics::scm(tp.ihc, gen, w));
        if (brown_by_label)
            (*brown_by_label)[synth::label_name(tp.label)].push_back(synth::brown_score(gen));
    }
    return mean_of(scms);
}

bool criterion_end_to_end(std::ostringstream& out) {
    synth::GeneratorSpec spec;  // generator defaults at 64x64
    spec.image_size = 64;
    spec.seed = 0;
    auto train_pairs = synth::generate_corpus(spec, 400);
    auto tests = balanced_test_set(1000003, 5, 64);

    RunConfig cfg;  // desk defaults: 64x64, f=8, hidden 256, depth 6, 2000 steps
    cfg.opt.seed = 0;
    cfg.opt.checkpoint_every = 0;
    cfg.guidance.steps = 50;

    const fs::path dir = work_dir() / "c7";
    Pipeline trained = make_pipeline(cfg);
    TrainOptions opts;
    opts.out_dir = (dir / "run").string();
    opts.quiet = true;
    TrainResult res = train_run(trained, train_pairs, opts);

    RunConfig base_cfg = cfg;
    base_cfg.opt.steps = 0;  // codec + latent-scale fit only, no training
    Pipeline untrained = make_pipeline(base_cfg);
    TrainOptions base_opts;
    base_opts.out_dir = (dir / "baseline").string();
    base_opts.quiet = true;
    train_run(untrained, train_pairs, base_opts);

    const double scm_base = mean_scm_against_truth(tests, untrained, cfg.guidance, 1, nullptr);

    // (b) brown-channel monotonicity across five sampling seeds; seed 1 also
    // provides the SCM for part (a).
    int monotone = 0;
    double scm_trained = 0.0;
    std::ostringstream seeds_detail;
    for (uint64_t ss = 1; ss <= 5; ++ss) {
        std::map<std::string, std::vector<double>> brown;
        const double s = mean_scm_against_truth(tests, trained, cfg.guidance, ss, &brown);
        if (ss == 1) scm_trained = s;
        const double b0 = mean_of(brown["0"]), b1 = mean_of(brown["1+"]);
        const double b2 = mean_of(brown["2+"]), b3 = mean_of(brown["3+"]);
        const bool mono = b0 < b1 && b1 < b2 && b2 < b3;
        monotone += mono ? 1 : 0;
        seeds_detail << (mono ? "+" : "-");
    }
    const bool pass_scm = scm_trained >= 2.0 * scm_base && scm_trained > 0.0;
    out << "loss " << res.step0_loss << "->" << res.final_loss << ", scm trained "
        << scm_trained << " vs untrained " << scm_base << " (need >= 2x), brown monotone "
        << monotone << "/5 seeds [" << seeds_detail.str() << "]";
    return pass_scm && monotone >= 4;
}

// ---------- criterion 8 ----------

RunConfig ablation_config(uint64_t seed) {
    RunConfig cfg;
    cfg.model.hidden_dim = 64;
    cfg.model.depth = 2;
    cfg.model.num_heads = 4;
    cfg.model.d_sem = 32;
    cfg.codec.compression_factor = 4;
    cfg.data.image_size = 32;
    cfg.opt.steps = 2000;  // orderings are unstable below ~2000 steps at this scale
    cfg.opt.lr = 3e-4;
    cfg.opt.seed = seed;
    cfg.opt.checkpoint_every = 0;
    cfg.guidance.steps = 25;
    return cfg;
}

struct ArmScore {
    double scm = 0.0;
    double lap = 0.0;
};

ArmScore run_ablation_arm(RunConfig cfg, const std::vector<synth::SlidePair>& train_pairs,
                          const std::vector<synth::SlidePair>& tests, const fs::path& dir) {
    Pipeline p = make_pipeline(cfg);
    TrainOptions opts;
    opts.out_dir = dir.string();
    opts.quiet = true;
    train_run(p, train_pairs, opts);
    metrics::WindowSpec w;
    ArmScore score;
    for (const auto& tp : tests) {
        GuidanceConfig g = cfg.guidance;
        g.seed = image_seed(cfg.opt.seed, tp.id);
        Tensor gen = translate(tp.he, *p.model, *p.sem, *p.codec, p.sched, g);
        score.scm += metrics::scm(tp.ihc, gen, w);
        score.lap += metrics::laplacian_energy(gen);
    }
    score.scm /= double(tests.size());
    score.lap /= double(tests.size());
    return score;
}

bool criterion_ablations(std::ostringstream& out) {
    synth::GeneratorSpec spec;
    spec.image_size = 32;
    spec.seed = 500;
    auto train_pairs = synth::generate_corpus(spec, 48);
    auto tests = balanced_test_set(2000003, 6, 32);

    const fs::path dir = work_dir() / "c8";
    int cond_wins = 0, loss_wins = 0;
    std::ostringstream detail;
    for (uint64_t s = 0; s < 5; ++s) {
        RunConfig base = ablation_config(100 + s);

        RunConfig dual = base;
        dual.model.mode = ConditioningMode::dual_cross_attn;
        RunConfig sem = base;
        sem.model.mode = ConditioningMode::semantic_only;
        const ArmScore a_dual = run_ablation_arm(dual, train_pairs, tests, dir / "work");
        const ArmScore a_sem = run_ablation_arm(sem, train_pairs, tests, dir / "work");
        const bool cw = a_dual.scm >= a_sem.scm;
        cond_wins += cw ? 1 : 0;

        RunConfig hyb = base;
        hyb.loss = {0.7, 0.3};
        RunConfig mse = base;
        mse.loss = {1.0, 0.0};
        const ArmScore a_hyb = run_ablation_arm(hyb, train_pairs, tests, dir / "work");
        const ArmScore a_mse = run_ablation_arm(mse, train_pairs, tests, dir / "work");
        const bool lw = a_hyb.lap > a_mse.lap;
        loss_wins += lw ? 1 : 0;
        detail << " s" << s << ":[scm " << a_dual.scm << (cw ? ">=" : "<") << a_sem.scm
               << ", lap " << a_hyb.lap << (lw ? ">" : "<=") << a_mse.lap << "]";
    }
    out << "dual_cross_attn beats semantic_only on SCM " << cond_wins
        << "/5, hybrid_73 beats mse_only on high-freq energy " << loss_wins << "/5;"
        << detail.str();
    return cond_wins >= 4 && loss_wins >= 4;
}

// ---------- criterion 9 ----------

RunConfig repro_config() {
    RunConfig cfg;
    cfg.model.hidden_dim = 16;
    cfg.model.depth = 2;
    cfg.model.num_heads = 2;
    cfg.model.d_sem = 8;
    cfg.codec.compression_factor = 4;
    cfg.schedule.T = 50;
    cfg.data.image_size = 16;
    cfg.opt.steps = 10;
    cfg.opt.batch_size = 2;
    cfg.opt.lr = 1e-3;
    cfg.opt.seed = 7;
    cfg.opt.checkpoint_every = 0;
    return cfg;
}

bool criterion_reproducibility(std::ostringstream& out) {
    synth::GeneratorSpec spec;
    spec.image_size = 16;
    spec.seed = 700;
    auto pairs = synth::generate_corpus(spec, 8);
    const fs::path dir = work_dir() / "c9";

    auto run_for = [&](const RunConfig& cfg, const std::string& sub, int steps,
                       const std::string& resume) {
        RunConfig c = cfg;
        c.opt.steps = steps;
        Pipeline p = make_pipeline(c);
        TrainOptions opts;
        opts.out_dir = (dir / sub).string();
        opts.resume_from = resume;
        opts.quiet = true;
        TrainResult r = train_run(p, pairs, opts);
        return std::make_pair(std::move(p), std::move(r));
    };

    RunConfig cfg = repro_config();
    auto [p1, r1] = run_for(cfg, "a", 10, "");
    auto [p2, r2] = run_for(cfg, "b", 10, "");
    if (r1.losses != r2.losses) {
        out << "same-seed loss trajectories differ";
        return false;
    }
    const auto& e1 = p1.model->params().entries();
    const auto& e2 = p2.model->params().entries();
    for (size_t i = 0; i < e1.size(); ++i)
        if (e1[i].second->value.data != e2[i].second->value.data) {
            out << "same-seed parameters differ in " << e1[i].first;
            return false;
        }

    // Checkpoint round-trip: loading into a fresh pipeline restores every
    // parameter bit-exactly.
    Pipeline fresh = make_pipeline(cfg);
    load_pipeline(fresh, r1.checkpoint_path);
    const auto& ef = fresh.model->params().entries();
    for (size_t i = 0; i < e1.size(); ++i)
        if (ef[i].second->value.data != e1[i].second->value.data) {
            out << "checkpoint round-trip not bit-exact in " << ef[i].first;
            return false;
        }

    // Resume: 5 steps, then continue to 10; the continued trajectory must
    // match the uninterrupted one to 1e-6 relative.
    auto [ph, rh] = run_for(cfg, "half", 5, "");
    auto [pr, rr] = run_for(cfg, "resumed", 10, rh.checkpoint_path);
    if (rr.losses.size() != 5) {
        out << "resumed run executed " << rr.losses.size() << " steps, expected 5";
        return false;
    }
    double worst = 0.0;
    for (size_t i = 0; i < 5; ++i) {
        const double a = r1.losses[5 + i], b = rr.losses[i];
        worst = std::max(worst, std::fabs(a - b) / std::max(std::fabs(a), 1e-12));
    }
    if (worst > 1e-6) {
        out << "resumed losses deviate, worst rel err " << worst;
        return false;
    }
    out << "bit-identical reruns, bit-exact round-trip, resume worst rel err " << worst;
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) g_selected.push_back(std::atoi(argv[i]));
    std::printf("acceptance suite\n");
    run_criterion(1, "schedule correctness", 10.0, criterion_schedule);
    run_criterion(2, "CFG algebra", 60.0, criterion_cfg);
    run_criterion(3, "loss suite", 30.0, criterion_loss);
    run_criterion(4, "gradient fidelity", 120.0, criterion_gradients);
    run_criterion(5, "metric suite", 60.0, criterion_metrics);
    run_criterion(6, "luminance-bias demonstration", 120.0, criterion_luminance_bias);
    run_criterion(7, "end-to-end toy run", 14400.0, criterion_end_to_end);
    run_criterion(8, "ablation orderings", 14400.0, criterion_ablations);
    run_criterion(9, "reproducibility+persistence", 0.0, criterion_reproducibility);

    int failed = 0;
    for (const auto& c : g_results) failed += c.pass ? 0 : 1;
    std::printf("%d/%d criteria passed\n", int(g_results.size()) - failed,
                int(g_results.size()));
    return failed == 0 ? 0 : 1;
}
