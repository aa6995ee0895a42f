#include "vstain/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <stdexcept>

#include "vstain/image_io.hpp"

namespace fs = std::filesystem;

namespace vstain::synth {

std::string label_name(Her2Label l) {
    switch (l) {
        case Her2Label::l0: return "0";
        case Her2Label::l1: return "1+";
        case Her2Label::l2: return "2+";
        case Her2Label::l3: return "3+";
    }
    throw std::invalid_argument("label_name: bad label");
}

Her2Label parse_label(const std::string& s) {
    if (s == "0") return Her2Label::l0;
    if (s == "1+") return Her2Label::l1;
    if (s == "2+") return Her2Label::l2;
    if (s == "3+") return Her2Label::l3;
    throw std::invalid_argument("parse_label: '" + s + "' is not a HER2 level");
}

void GeneratorSpec::validate() const {
    if (image_size < 16) throw std::invalid_argument("GeneratorSpec: image_size too small");
    if (nuclei_min < 1 || nuclei_max < nuclei_min)
        throw std::invalid_argument("GeneratorSpec: bad nuclei range");
    if (background_fraction < 0.2 || background_fraction > 0.8)
        throw std::invalid_argument("GeneratorSpec: background_fraction outside [0.2, 0.8]");
    if (misalignment_px < 0.0) throw std::invalid_argument("GeneratorSpec: negative misalignment");
}

namespace {

struct Nucleus {
    double cx, cy, rx, ry, rot;
    double color_jitter;
    double arc_start;  // radians; where the membrane ring begins
};

// Elliptical normalized distance of (x,y) from the nucleus boundary.
double ell_dist(const Nucleus& nu, double x, double y) {
    const double dx = x - nu.cx, dy = y - nu.cy;
    const double c = std::cos(nu.rot), s = std::sin(nu.rot);
    const double u = (c * dx + s * dy) / nu.rx;
    const double v = (-s * dx + c * dy) / nu.ry;
    return std::sqrt(u * u + v * v);
}

double smoothstep(double lo, double hi, double x) {
    const double t = std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

void blend(double* px, const double* col, double a) {
    for (int c = 0; c < 3; ++c) px[c] = (1.0 - a) * px[c] + a * col[c];
}

// Smooth low-frequency displacement warp of amplitude amp (pixels),
// bilinear resampling with clamped borders.
Tensor warp(const Tensor& img, double amp, std::mt19937_64& rng) {
    const int64_t H = img.dim(0), W = img.dim(1);
    std::uniform_real_distribution<double> uphase(0.0, 2.0 * std::numbers::pi);
    const double kx = 2.0 * std::numbers::pi / double(W), ky = 2.0 * std::numbers::pi / double(H);
    const double p1 = uphase(rng), p2 = uphase(rng), p3 = uphase(rng), p4 = uphase(rng);
    Tensor out({H, W, 3});
    for (int64_t i = 0; i < H; ++i) {
        for (int64_t j = 0; j < W; ++j) {
            const double dx = amp * std::sin(kx * double(j) + ky * double(i) + p1) *
                              std::cos(2.0 * ky * double(i) + p2);
            const double dy = amp * std::sin(2.0 * kx * double(j) + p3) *
                              std::cos(ky * double(i) + kx * double(j) + p4);
            const double sx = std::clamp(double(j) + dx, 0.0, double(W - 1));
            const double sy = std::clamp(double(i) + dy, 0.0, double(H - 1));
            const int64_t x0 = int64_t(std::floor(sx)), y0 = int64_t(std::floor(sy));
            const int64_t x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
            const double fx = sx - double(x0), fy = sy - double(y0);
            for (int c = 0; c < 3; ++c) {
                const double v00 = img[(y0 * W + x0) * 3 + c], v01 = img[(y0 * W + x1) * 3 + c];
                const double v10 = img[(y1 * W + x0) * 3 + c], v11 = img[(y1 * W + x1) * 3 + c];
                out[(i * W + j) * 3 + c] =
                    (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
            }
        }
    }
    return out;
}

}  // namespace

SlidePair generate_pair(const GeneratorSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    const int S = spec.image_size;

    std::uniform_int_distribution<int> ulabel(0, 3);
    const int label = ulabel(rng);

    // Nuclei count grows with the label so the expression level leaves a
    // trace in the H&E morphology.
    const int span = spec.nuclei_max - spec.nuclei_min;
    std::uniform_int_distribution<int> ujit(0, std::max(1, span / 3));
    int count = spec.nuclei_min + label * span / 4 + ujit(rng);
    count = std::clamp(count, spec.nuclei_min, spec.nuclei_max);

    // Tissue occupies a centered square region leaving roughly
    // background_fraction of the canvas untouched.
    const double tissue_half = 0.5 * double(S) * std::sqrt(1.0 - spec.background_fraction);
    std::uniform_real_distribution<double> upos(-tissue_half, tissue_half);
    std::uniform_real_distribution<double> urad(2.5, 5.0);
    std::uniform_real_distribution<double> urot(0.0, std::numbers::pi);
    std::uniform_real_distribution<double> ujitc(-0.04, 0.04);
    std::uniform_real_distribution<double> uarc(0.0, 2.0 * std::numbers::pi);
    std::vector<Nucleus> nuclei(static_cast<size_t>(count));
    for (auto& nu : nuclei) {
        nu.cx = 0.5 * double(S) + upos(rng);
        nu.cy = 0.5 * double(S) + upos(rng);
        nu.rx = urad(rng);
        nu.ry = urad(rng);
        nu.rot = urot(rng);
        nu.color_jitter = ujitc(rng);
        nu.arc_start = uarc(rng);
    }

    // Fibrous texture: a few faint sinusoidal strands in the H&E eosin channel.
    std::uniform_real_distribution<double> uphase(0.0, 2.0 * std::numbers::pi);
    double fib_k[3], fib_p[3];
    for (int f = 0; f < 3; ++f) {
        fib_k[f] = 2.0 * std::numbers::pi * (1.0 + 2.0 * double(f)) / double(S);
        fib_p[f] = uphase(rng);
    }

    std::uniform_real_distribution<double> unoise(-0.012, 0.012);
    Tensor he({S, S, 3}), ihc({S, S, 3});  // built in [0,1], mapped at the end

    const double hema_dark = 1.0 - 0.10 * double(label);  // darker nuclei at high grade
    static const double kCounter[3] = {0.60, 0.66, 0.76};
    static const double kBrown[3] = {0.52, 0.30, 0.10};
    static const double kIntensity[4] = {0.0, 0.35, 0.65, 0.95};
    static const double kArcFrac[4] = {0.0, 0.40, 0.72, 1.0};
    // Diffuse cytoplasmic DAB wash. Thin membrane rings are high-frequency
    // detail; the wash is the low-frequency component of the stain and keeps
    // the expression level visible even under aggressive latent compression.
    static const double kWash[4] = {0.0, 0.15, 0.25, 0.35};
    const double brown_a = kIntensity[label];
    const double arc_frac = kArcFrac[label];
    const double wash_a = kWash[label];

    for (int i = 0; i < S; ++i) {
        for (int j = 0; j < S; ++j) {
            const double n = unoise(rng);  // shared grain keeps the pair aligned
            double* hp = he.ptr() + (int64_t(i) * S + j) * 3;
            double* ip = ihc.ptr() + (int64_t(i) * S + j) * 3;
            hp[0] = 0.96 + n;
            hp[1] = 0.93 + n;
            hp[2] = 0.95 + n;
            ip[0] = 0.95 + n;
            ip[1] = 0.95 + n;
            ip[2] = 0.96 + n;
            double fib = 0.0;
            for (int f = 0; f < 3; ++f)
                fib += std::sin(fib_k[f] * (double(j) + 0.37 * double(f) * double(i)) + fib_p[f]);
            hp[1] -= 0.015 * std::fabs(fib);

            for (const auto& nu : nuclei) {
                const double d = ell_dist(nu, double(j) + 0.5, double(i) + 0.5);
                if (d > 2.2) continue;
                // H&E: eosin halo then hematoxylin core.
                const double halo = smoothstep(1.9, 1.2, d) * (1.0 - smoothstep(1.15, 0.95, d));
                if (halo > 0.0) {
                    const double pink[3] = {0.93, 0.76, 0.84};
                    blend(hp, pink, 0.8 * halo);
                }
                const double core = smoothstep(1.1, 0.8, d);
                if (core > 0.0) {
                    const double purple[3] = {(0.42 + nu.color_jitter) * hema_dark,
                                              (0.26 + nu.color_jitter) * hema_dark,
                                              (0.55 + nu.color_jitter) * hema_dark};
                    blend(hp, purple, core);
                    blend(ip, kCounter, core);  // counterstain shares the geometry
                }
                // IHC: diffuse cytoplasmic wash across the cell disc.
                if (wash_a > 0.0) {
                    const double wash = 1.0 - smoothstep(1.4, 1.8, d);
                    if (wash > 0.0) blend(ip, kBrown, wash_a * wash);
                }
                // IHC: brown membrane ring, completeness monotone in label.
                if (brown_a > 0.0) {
                    const double ring = smoothstep(0.95, 1.1, d) * (1.0 - smoothstep(1.35, 1.6, d));
                    if (ring > 0.0) {
                        double ang = std::atan2(double(i) + 0.5 - nu.cy, double(j) + 0.5 - nu.cx) -
                                     nu.arc_start;
                        ang = std::fmod(ang + 4.0 * std::numbers::pi, 2.0 * std::numbers::pi);
                        if (ang <= arc_frac * 2.0 * std::numbers::pi)
                            blend(ip, kBrown, brown_a * ring);
                    }
                }
            }
        }
    }

    if (spec.misalignment_px > 0.0) ihc = warp(ihc, spec.misalignment_px, rng);

    for (auto& v : he.data) v = std::clamp(v * 2.0 - 1.0, -1.0, 1.0);
    for (auto& v : ihc.data) v = std::clamp(v * 2.0 - 1.0, -1.0, 1.0);

    SlidePair pair;
    pair.he = std::move(he);
    pair.ihc = std::move(ihc);
    pair.label = Her2Label(label);
    pair.id = std::to_string(spec.seed);
    return pair;
}

std::vector<SlidePair> generate_corpus(GeneratorSpec spec, int n) {
    std::vector<SlidePair> out;
    out.reserve(size_t(n));
    for (int i = 0; i < n; ++i) {
        out.push_back(generate_pair(spec));
        ++spec.seed;
    }
    return out;
}

double brown_score(const Tensor& ihc) {
    if (ihc.rank() != 3 || ihc.dim(2) != 3)
        throw std::invalid_argument("brown_score: expected [H,W,3]");
    double acc = 0.0;
    const int64_t n = ihc.dim(0) * ihc.dim(1);
    for (int64_t i = 0; i < n; ++i)
        acc += std::max(0.0, (ihc[i * 3] - ihc[i * 3 + 2]) * 127.5);
    return acc / double(n);
}

bool label_from_filename(const std::string& filename, Her2Label& out) {
    std::string stem = fs::path(filename).stem().string();
    const auto pos = stem.rfind('_');
    if (pos == std::string::npos) return false;
    try {
        out = parse_label(stem.substr(pos + 1));
        return true;
    } catch (const std::invalid_argument&) {
        return false;
    }
}

std::vector<SlidePair> load_paired_dir(const std::string& he_dir, const std::string& ihc_dir,
                                       int image_size) {
    if (!fs::is_directory(he_dir) || !fs::is_directory(ihc_dir))
        throw std::runtime_error("load_paired_dir: not a directory");
    std::set<std::string> he_names, ihc_names;
    for (const auto& e : fs::directory_iterator(he_dir))
        if (e.is_regular_file()) he_names.insert(e.path().filename().string());
    for (const auto& e : fs::directory_iterator(ihc_dir))
        if (e.is_regular_file()) ihc_names.insert(e.path().filename().string());
    std::vector<SlidePair> pairs;
    for (const auto& name : he_names) {
        if (!ihc_names.count(name)) {
            std::cerr << "load_paired_dir: no IHC match for " << name << ", skipping\n";
            continue;
        }
        SlidePair p;
        try {
            p.he = io::read_image((fs::path(he_dir) / name).string(), image_size);
            p.ihc = io::read_image((fs::path(ihc_dir) / name).string(), image_size);
        } catch (const std::exception& e) {
            std::cerr << "load_paired_dir: " << e.what() << ", skipping\n";
            continue;
        }
        p.id = fs::path(name).stem().string();
        Her2Label lbl;
        p.label = label_from_filename(name, lbl) ? lbl : Her2Label::l0;
        pairs.push_back(std::move(p));
    }
    for (const auto& name : ihc_names)
        if (!he_names.count(name))
            std::cerr << "load_paired_dir: no H&E match for " << name << ", skipping\n";
    if (pairs.empty()) throw std::runtime_error("load_paired_dir: no matched pairs");
    return pairs;
}

}  // namespace vstain::synth
