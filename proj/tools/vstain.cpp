// vstain: train / translate / evaluate / ablate / make-synthetic CLI for the
// latent-diffusion virtual-staining pipeline.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 numeric failure.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "vstain/image_io.hpp"
#include "vstain/metrics.hpp"
#include "vstain/trainer.hpp"

namespace fs = std::filesystem;
using namespace vstain;

namespace {

struct ConfigFlags {
    std::string config_file;
    // Optional overrides; only applied when the user passed the flag.
    CLI::Option *o_steps = nullptr, *o_lr = nullptr, *o_batch = nullptr, *o_seed = nullptr,
                *o_he = nullptr, *o_ihc = nullptr, *o_size = nullptr, *o_mode = nullptr,
                *o_lmse = nullptr, *o_ll1 = nullptr, *o_preset = nullptr, *o_scale = nullptr,
                *o_sample_steps = nullptr, *o_hidden = nullptr, *o_depth = nullptr,
                *o_dsem = nullptr, *o_codec = nullptr, *o_factor = nullptr, *o_ema = nullptr,
                *o_drop = nullptr;
    int steps = 0, batch = 0, size = 0, sample_steps = 0, hidden = 0, depth = 0, dsem = 0,
        factor = 0;
    double lr = 0, lmse = 0, ll1 = 0, scale = 0, ema = 0, drop = 0;
    uint64_t seed = 0;
    std::string he, ihc, mode, preset, codec;
};

void add_config_flags(CLI::App& app, ConfigFlags& f) {
    app.add_option("--config", f.config_file, "JSON config file");
    f.o_steps = app.add_option("--steps", f.steps, "training steps");
    f.o_lr = app.add_option("--lr", f.lr, "learning rate");
    f.o_batch = app.add_option("--batch-size", f.batch, "batch size");
    f.o_seed = app.add_option("--seed", f.seed, "global seed");
    f.o_he = app.add_option("--he-dir", f.he, "H&E image directory");
    f.o_ihc = app.add_option("--ihc-dir", f.ihc, "IHC image directory");
    f.o_size = app.add_option("--image-size", f.size, "square image size");
    f.o_mode = app.add_option("--mode", f.mode,
                              "conditioning mode (dual_cross_attn|dual_concat|"
                              "semantic_only|spatial_only)");
    f.o_lmse = app.add_option("--lambda-mse", f.lmse, "MSE loss weight");
    f.o_ll1 = app.add_option("--lambda-l1", f.ll1, "L1 loss weight");
    f.o_preset = app.add_option("--loss-preset", f.preset,
                                "loss preset (mse_only|l1_only|hybrid_91|hybrid_73)");
    f.o_scale = app.add_option("--guidance-scale", f.scale, "CFG scale");
    f.o_sample_steps = app.add_option("--sample-steps", f.sample_steps,
                                      "sampling steps (0 = full schedule)");
    f.o_hidden = app.add_option("--hidden", f.hidden, "transformer width");
    f.o_depth = app.add_option("--depth", f.depth, "transformer depth");
    f.o_dsem = app.add_option("--d-sem", f.dsem, "semantic embedding dim");
    f.o_codec = app.add_option("--codec", f.codec, "codec (fixed_orthogonal|toy_autoencoder)");
    f.o_factor = app.add_option("--compression-factor", f.factor, "codec factor (2|4|8)");
    f.o_ema = app.add_option("--ema-decay", f.ema, "EMA decay (0 disables)");
    f.o_drop = app.add_option("--cond-drop-p", f.drop, "joint CFG dropout probability");
}

LossWeights loss_preset(const std::string& name) {
    if (name == "mse_only") return {1.0, 0.0};
    if (name == "l1_only") return {0.0, 1.0};
    if (name == "hybrid_91") return {0.9, 0.1};
    if (name == "hybrid_73") return {0.7, 0.3};
    throw std::invalid_argument("unknown loss preset '" + name + "'");
}

RunConfig build_config(const ConfigFlags& f) {
    RunConfig cfg = f.config_file.empty() ? RunConfig{} : config_from_file(f.config_file);
    if (*f.o_steps) cfg.opt.steps = f.steps;
    if (*f.o_lr) cfg.opt.lr = f.lr;
    if (*f.o_batch) cfg.opt.batch_size = f.batch;
    if (*f.o_seed) cfg.opt.seed = f.seed;
    if (*f.o_he) cfg.data.he_dir = f.he;
    if (*f.o_ihc) cfg.data.ihc_dir = f.ihc;
    if (*f.o_size) cfg.data.image_size = f.size;
    if (*f.o_mode) cfg.model.mode = conditioning_mode_from_string(f.mode);
    if (*f.o_preset) cfg.loss = loss_preset(f.preset);
    if (*f.o_lmse) cfg.loss.lambda_mse = f.lmse;
    if (*f.o_ll1) cfg.loss.lambda_l1 = f.ll1;
    if (*f.o_scale) cfg.guidance.scale = f.scale;
    if (*f.o_sample_steps) cfg.guidance.steps = f.sample_steps;
    if (*f.o_hidden) cfg.model.hidden_dim = f.hidden;
    if (*f.o_depth) cfg.model.depth = f.depth;
    if (*f.o_dsem) cfg.model.d_sem = f.dsem;
    if (*f.o_codec)
        cfg.codec.kind =
            f.codec == "toy_autoencoder" ? CodecKind::toy_autoencoder : CodecKind::fixed_orthogonal;
    if (*f.o_factor) cfg.codec.compression_factor = f.factor;
    if (*f.o_ema) cfg.opt.ema_decay = f.ema;
    if (*f.o_drop) cfg.cond_drop_p = f.drop;
    cfg.validate();
    return cfg;
}

std::vector<synth::SlidePair> load_dataset(const RunConfig& cfg) {
    if (cfg.data.he_dir.empty() || cfg.data.ihc_dir.empty())
        throw std::runtime_error("no dataset: set --he-dir/--ihc-dir or the data section");
    return synth::load_paired_dir(resolve_data_path(cfg.data.he_dir),
                                  resolve_data_path(cfg.data.ihc_dir), cfg.data.image_size);
}

// ---- make-synthetic ----

int cmd_make_synthetic(const std::string& out_dir, int count, int size, uint64_t seed,
                       double misalignment, double background_fraction) {
    synth::GeneratorSpec spec;
    spec.image_size = size;
    spec.seed = seed;
    spec.misalignment_px = misalignment;
    spec.background_fraction = background_fraction;
    spec.validate();
    fs::create_directories(fs::path(out_dir) / "he");
    fs::create_directories(fs::path(out_dir) / "ihc");
    std::ofstream labels(fs::path(out_dir) / "labels.csv");
    labels << "id,label\n";
    for (int i = 0; i < count; ++i) {
        spec.seed = seed + uint64_t(i);
        auto pair = synth::generate_pair(spec);
        std::ostringstream name;
        name << std::setw(5) << std::setfill('0') << i << "_test_" << label_name(pair.label)
             << ".png";
        io::write_image((fs::path(out_dir) / "he" / name.str()).string(), pair.he);
        io::write_image((fs::path(out_dir) / "ihc" / name.str()).string(), pair.ihc);
        labels << name.str() << "," << label_name(pair.label) << "\n";
    }
    std::cout << "wrote " << count << " pairs to " << out_dir << "\n";
    return 0;
}

// ---- train ----

int cmd_train(const ConfigFlags& f, const TrainOptions& opts) {
    RunConfig cfg = build_config(f);
    auto pairs = load_dataset(cfg);
    Pipeline p = make_pipeline(cfg);
    auto result = train_run(p, pairs, opts);
    std::cout << "trained " << result.losses.size() << " steps, loss " << result.step0_loss
              << " -> " << result.final_loss << "\ncheckpoint: " << result.checkpoint_path << "\n";
    return 0;
}

// ---- translate ----

int cmd_translate(const ConfigFlags& f, const std::string& ckpt, const std::string& input_dir,
                  const std::string& out_dir, bool ignore_fp) {
    RunConfig cfg = build_config(f);
    Pipeline p = make_pipeline(cfg);
    load_pipeline(p, ckpt, ignore_fp);
    if (!p.codec->scale_fitted)
        throw std::runtime_error("translate: checkpoint has no fitted latent scale");
    fs::create_directories(out_dir);
    std::vector<std::string> names;
    if (fs::is_directory(input_dir))
        for (const auto& e : fs::directory_iterator(input_dir))
            if (e.is_regular_file()) names.push_back(e.path().filename().string());
    if (names.empty()) {
        std::cerr << "translate: no input images in " << input_dir << "\n";
        return 0;
    }
    std::sort(names.begin(), names.end());
    for (const auto& name : names) {
        Tensor he;
        try {
            he = io::read_image((fs::path(input_dir) / name).string(), cfg.data.image_size);
        } catch (const std::exception& e) {
            std::cerr << "translate: " << e.what() << ", skipping\n";
            continue;
        }
        GuidanceConfig g = cfg.guidance;
        g.seed = image_seed(cfg.opt.seed, name);
        Tensor out = translate(he, *p.model, *p.sem, *p.codec, p.sched, g);
        io::write_image((fs::path(out_dir) / name).string(), out);
    }
    std::cout << "translated " << names.size() << " images to " << out_dir << "\n";
    return 0;
}

// ---- evaluate ----

std::map<std::string, std::string> read_labels_csv(const std::string& path) {
    std::map<std::string, std::string> out;
    std::ifstream in(path);
    if (!in) throw std::runtime_error("evaluate: cannot open labels file " + path);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        out[fs::path(line.substr(0, comma)).stem().string()] = line.substr(comma + 1);
    }
    return out;
}

int cmd_evaluate(const std::string& gen_dir, const std::string& truth_dir,
                 const std::string& labels_file, const std::string& report_path,
                 const metrics::WindowSpec& window, int image_size) {
    std::map<std::string, std::string> labels;
    if (!labels_file.empty()) labels = read_labels_csv(labels_file);
    std::vector<metrics::CorpusPair> pairs;
    if (!fs::is_directory(gen_dir) || !fs::is_directory(truth_dir))
        throw std::runtime_error("evaluate: input is not a directory");
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(gen_dir))
        if (e.is_regular_file()) names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    for (const auto& name : names) {
        if (!fs::exists(fs::path(truth_dir) / name)) {
            std::cerr << "evaluate: no ground truth for " << name << ", skipping\n";
            continue;
        }
        metrics::CorpusPair cp;
        cp.id = fs::path(name).stem().string();
        if (auto it = labels.find(cp.id); it != labels.end()) {
            cp.label = it->second;
        } else {
            synth::Her2Label lbl;
            if (synth::label_from_filename(name, lbl)) cp.label = synth::label_name(lbl);
        }
        cp.generated = io::read_image((fs::path(gen_dir) / name).string(), image_size);
        cp.truth = io::read_image((fs::path(truth_dir) / name).string(), image_size);
        pairs.push_back(std::move(cp));
    }
    if (pairs.empty()) throw std::runtime_error("evaluate: empty corpus");
    auto report = metrics::evaluate_corpus(pairs, window);
    std::ofstream csv(report_path);
    report.write_csv(csv);
    report.write_table(std::cout);
    std::cout << "report: " << report_path << "\n";
    return 0;
}

// ---- ablate ----

struct AblateRow {
    std::string kind, name;
    uint64_t seed;
    double scm, ssim, psnr, mse, lap_energy;
};

AblateRow run_one_ablation(RunConfig cfg, const std::string& kind, const std::string& name,
                           const std::vector<synth::SlidePair>& train_pairs,
                           const std::vector<synth::SlidePair>& test_pairs,
                           const std::string& work_dir) {
    Pipeline p = make_pipeline(cfg);
    TrainOptions opts;
    opts.out_dir = work_dir;
    opts.quiet = true;
    train_run(p, train_pairs, opts);
    std::vector<metrics::CorpusPair> eval_pairs;
    double lap = 0.0;
    for (const auto& tp : test_pairs) {
        GuidanceConfig g = cfg.guidance;
        g.seed = image_seed(cfg.opt.seed, tp.id);
        Tensor out = translate(tp.he, *p.model, *p.sem, *p.codec, p.sched, g);
        lap += metrics::laplacian_energy(out);
        metrics::CorpusPair cp;
        cp.id = tp.id;
        cp.label = synth::label_name(tp.label);
        cp.generated = std::move(out);
        cp.truth = tp.ihc;
        eval_pairs.push_back(std::move(cp));
    }
    auto rep = metrics::evaluate_corpus(eval_pairs, {});
    return {kind,
            name,
            cfg.opt.seed,
            rep.overall_mean.scm,
            rep.overall_mean.ssim,
            rep.overall_mean.psnr,
            rep.overall_mean.mse,
            lap / double(test_pairs.size())};
}

int cmd_ablate(const ConfigFlags& f, const std::string& out_dir, int n_seeds, int n_train,
               int n_test) {
    RunConfig base = build_config(f);
    fs::create_directories(out_dir);

    synth::GeneratorSpec spec;
    spec.image_size = base.data.image_size;
    spec.seed = base.opt.seed;
    auto train_pairs = synth::generate_corpus(spec, n_train);
    spec.seed = base.opt.seed + 1000003;  // disjoint seed range for the test split
    auto test_pairs = synth::generate_corpus(spec, n_test);
    for (auto& tp : test_pairs) tp.id += ".png";  // stable per-image seeding key

    static const char* kModes[] = {"semantic_only", "spatial_only", "dual_concat",
                                   "dual_cross_attn"};
    static const char* kPresets[] = {"mse_only", "l1_only", "hybrid_91", "hybrid_73"};

    std::vector<AblateRow> rows;
    for (int s = 0; s < n_seeds; ++s) {
        RunConfig cfg = base;
        cfg.opt.seed = base.opt.seed + uint64_t(s);
        for (const char* mode : kModes) {
            RunConfig c = cfg;
            c.model.mode = conditioning_mode_from_string(mode);
            rows.push_back(run_one_ablation(c, "conditioning", mode, train_pairs, test_pairs,
                                            (fs::path(out_dir) / "work").string()));
            std::cerr << "ablate conditioning/" << mode << " seed " << c.opt.seed << " scm "
                      << rows.back().scm << "\n";
        }
        for (const char* preset : kPresets) {
            RunConfig c = cfg;
            c.loss = loss_preset(preset);
            rows.push_back(run_one_ablation(c, "loss", preset, train_pairs, test_pairs,
                                            (fs::path(out_dir) / "work").string()));
            std::cerr << "ablate loss/" << preset << " seed " << c.opt.seed << " lap "
                      << rows.back().lap_energy << "\n";
        }
    }

    std::ofstream csv(fs::path(out_dir) / "ablation.csv");
    csv << "kind,name,seed,scm,ssim,psnr,mse,lap_energy\n" << std::setprecision(10);
    for (const auto& r : rows)
        csv << r.kind << "," << r.name << "," << r.seed << "," << r.scm << "," << r.ssim << ","
            << r.psnr << "," << r.mse << "," << r.lap_energy << "\n";

    // Ranked summary: conditioning modes by mean SCM, loss presets by mean
    // high-frequency energy.
    auto summarize = [&](const std::string& kind, const char* const* names, int n,
                         auto field) {
        std::vector<std::pair<double, std::string>> means;
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            int cnt = 0;
            for (const auto& r : rows)
                if (r.kind == kind && r.name == names[i]) {
                    acc += field(r);
                    ++cnt;
                }
            means.emplace_back(acc / double(cnt), names[i]);
        }
        std::sort(means.rbegin(), means.rend());
        return means;
    };
    std::cout << std::fixed << std::setprecision(4) << "conditioning (by mean SCM):\n";
    for (const auto& [v, n] : summarize("conditioning", kModes, 4,
                                        [](const AblateRow& r) { return r.scm; }))
        std::cout << "  " << std::left << std::setw(18) << n << v << "\n";
    std::cout << "loss presets (by mean Laplacian energy):\n";
    for (const auto& [v, n] : summarize("loss", kPresets, 4,
                                        [](const AblateRow& r) { return r.lap_energy; }))
        std::cout << "  " << std::left << std::setw(18) << n << v << "\n";
    std::cout << "rows: " << (fs::path(out_dir) / "ablation.csv").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"latent-diffusion virtual staining"};
    app.require_subcommand(1);

    // make-synthetic
    auto* mk = app.add_subcommand("make-synthetic", "generate paired synthetic slides");
    std::string mk_out = "data";
    int mk_count = 100, mk_size = 64;
    uint64_t mk_seed = 0;
    double mk_mis = 0.0, mk_bg = 0.5;
    mk->add_option("--out", mk_out, "output directory (gets he/, ihc/, labels.csv)");
    mk->add_option("--count", mk_count, "number of pairs");
    mk->add_option("--size", mk_size, "image size");
    mk->add_option("--seed", mk_seed, "base seed");
    mk->add_option("--misalignment", mk_mis, "IHC warp amplitude in pixels");
    mk->add_option("--background-fraction", mk_bg, "background area fraction");

    // train
    auto* tr = app.add_subcommand("train", "train the denoiser");
    ConfigFlags tr_f;
    add_config_flags(*tr, tr_f);
    TrainOptions tr_opts;
    tr->add_option("--out", tr_opts.out_dir, "checkpoint/log directory")->required();
    tr->add_option("--resume", tr_opts.resume_from, "checkpoint to resume from");
    tr->add_flag("--ignore-fingerprint", tr_opts.ignore_fingerprint,
                 "load checkpoints despite a config fingerprint mismatch");

    // translate
    auto* tl = app.add_subcommand("translate", "H&E -> IHC inference");
    ConfigFlags tl_f;
    add_config_flags(*tl, tl_f);
    std::string tl_ckpt, tl_in, tl_out = "translated";
    bool tl_ignore = false;
    tl->add_option("--checkpoint", tl_ckpt, "trained checkpoint")->required();
    tl->add_option("--input", tl_in, "directory of H&E images")->required();
    tl->add_option("--out", tl_out, "output directory");
    tl->add_flag("--ignore-fingerprint", tl_ignore);

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "score generated images against ground truth");
    std::string ev_gen, ev_truth, ev_labels, ev_report = "report.csv";
    int ev_size = 0;
    metrics::WindowSpec ev_win;
    bool ev_uniform = false, ev_perchan = false, ev_multiscale = false;
    ev->add_option("--generated", ev_gen, "generated image directory")->required();
    ev->add_option("--truth", ev_truth, "ground-truth image directory")->required();
    ev->add_option("--labels", ev_labels, "labels CSV (id,label); filenames used otherwise");
    ev->add_option("--report", ev_report, "output CSV path");
    ev->add_option("--image-size", ev_size, "resize images before scoring (0 keeps native)");
    ev->add_flag("--uniform-window", ev_uniform, "uniform instead of Gaussian SSIM window");
    ev->add_flag("--per-channel", ev_perchan, "average metrics over RGB instead of luma");
    ev->add_flag("--scm-multiscale", ev_multiscale, "5-scale dyadic SCM variant");

    // ablate
    auto* ab = app.add_subcommand("ablate", "conditioning/loss ablation sweep");
    ConfigFlags ab_f;
    add_config_flags(*ab, ab_f);
    std::string ab_out = "ablation";
    int ab_seeds = 5, ab_train = 48, ab_test = 12;
    ab->add_option("--out", ab_out, "output directory");
    ab->add_option("--num-seeds", ab_seeds, "seeded repetitions");
    ab->add_option("--train-pairs", ab_train, "synthetic training pairs per run");
    ab->add_option("--test-pairs", ab_test, "synthetic test pairs per run");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*mk) return cmd_make_synthetic(mk_out, mk_count, mk_size, mk_seed, mk_mis, mk_bg);
        if (*tr) return cmd_train(tr_f, tr_opts);
        if (*tl) return cmd_translate(tl_f, tl_ckpt, tl_in, tl_out, tl_ignore);
        if (*ev) {
            if (ev_uniform) ev_win.kind = metrics::WindowSpec::Kind::uniform;
            ev_win.per_channel = ev_perchan;
            ev_win.scales = ev_multiscale ? 5 : 1;
            return cmd_evaluate(ev_gen, ev_truth, ev_labels, ev_report, ev_win, ev_size);
        }
        if (*ab) return cmd_ablate(ab_f, ab_out, ab_seeds, ab_train, ab_test);
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
