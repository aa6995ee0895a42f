#include "vstain/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "vstain/kernels.hpp"

namespace vstain::metrics {

namespace {

constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);
constexpr double kC3 = kC2 / 2.0;

std::vector<double> window_weights(const WindowSpec& w) {
    std::vector<double> win(static_cast<size_t>(w.size));
    if (w.kind == WindowSpec::Kind::uniform) {
        std::fill(win.begin(), win.end(), 1.0 / double(w.size));
        return win;
    }
    const double c = (double(w.size) - 1.0) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < w.size; ++i) {
        win[size_t(i)] = std::exp(-(i - c) * (i - c) / (2.0 * w.sigma * w.sigma));
        sum += win[size_t(i)];
    }
    for (auto& v : win) v /= sum;
    return win;
}

void check_pair(const Tensor& y, const Tensor& y_gen, const WindowSpec& w) {
    check_same_shape(y, y_gen, "metrics");
    if (y.rank() != 3 || y.dim(2) != 3)
        throw std::invalid_argument("metrics: expected [H,W,3] images");
    if (y.dim(0) < w.size || y.dim(1) < w.size)
        throw std::invalid_argument("metrics: image smaller than window");
}

Tensor channel8(const Tensor& img, int ch) {
    const int64_t H = img.dim(0), W = img.dim(1);
    Tensor out({H, W});
    for (int64_t i = 0; i < H * W; ++i) out[i] = (img[i * 3 + ch] + 1.0) * 127.5;
    return out;
}

struct WindowStats {
    int64_t n = 0;  // number of window positions
    std::vector<double> mu_a, mu_b, var_a, var_b, cov;
};

WindowStats windowed_stats(const Tensor& a, const Tensor& b, const WindowSpec& w) {
    const int64_t H = a.dim(0), W = a.dim(1), k = w.size;
    const int64_t oh = H - k + 1, ow = W - k + 1;
    const auto win = window_weights(w);
    WindowStats st;
    st.n = oh * ow;
    auto run = [&](const double* img, std::vector<double>& out) {
        out.resize(size_t(st.n));
        kernels::window_mean(img, H, W, win.data(), k, out.data());
    };
    std::vector<double> ea2(size_t(st.n)), eb2(size_t(st.n)), eab(size_t(st.n));
    Tensor a2({H, W}), b2({H, W}), ab({H, W});
    kernels::hadamard(a.ptr(), a.ptr(), a2.ptr(), H * W);
    kernels::hadamard(b.ptr(), b.ptr(), b2.ptr(), H * W);
    kernels::hadamard(a.ptr(), b.ptr(), ab.ptr(), H * W);
    run(a.ptr(), st.mu_a);
    run(b.ptr(), st.mu_b);
    kernels::window_mean(a2.ptr(), H, W, win.data(), k, ea2.data());
    kernels::window_mean(b2.ptr(), H, W, win.data(), k, eb2.data());
    kernels::window_mean(ab.ptr(), H, W, win.data(), k, eab.data());
    st.var_a.resize(size_t(st.n));
    st.var_b.resize(size_t(st.n));
    st.cov.resize(size_t(st.n));
    for (int64_t i = 0; i < st.n; ++i) {
        st.var_a[size_t(i)] = std::max(0.0, ea2[size_t(i)] - st.mu_a[size_t(i)] * st.mu_a[size_t(i)]);
        st.var_b[size_t(i)] = std::max(0.0, eb2[size_t(i)] - st.mu_b[size_t(i)] * st.mu_b[size_t(i)]);
        st.cov[size_t(i)] = eab[size_t(i)] - st.mu_a[size_t(i)] * st.mu_b[size_t(i)];
    }
    return st;
}

SsimComponents components_from_stats(const WindowStats& st) {
    SsimComponents m;
    for (int64_t i = 0; i < st.n; ++i) {
        const double mu_a = st.mu_a[size_t(i)], mu_b = st.mu_b[size_t(i)];
        const double sa = std::sqrt(st.var_a[size_t(i)]), sb = std::sqrt(st.var_b[size_t(i)]);
        const double cov = st.cov[size_t(i)];
        const double l = (2.0 * mu_a * mu_b + kC1) / (mu_a * mu_a + mu_b * mu_b + kC1);
        const double c = (2.0 * sa * sb + kC2) / (sa * sa + sb * sb + kC2);
        const double s = (cov + kC3) / (sa * sb + kC3);
        m.luminance += l;
        m.contrast += c;
        m.structure += s;
        m.ssim += l * c * s;
    }
    const double n = double(st.n);
    m.luminance /= n;
    m.contrast /= n;
    m.structure /= n;
    m.ssim /= n;
    return m;
}

double scm_from_stats(const WindowStats& st) {
    double acc = 0.0;
    for (int64_t i = 0; i < st.n; ++i) {
        const double sa = std::sqrt(st.var_a[size_t(i)]), sb = std::sqrt(st.var_b[size_t(i)]);
        acc += (st.cov[size_t(i)] + kC3) / (sa * sb + kC3);
    }
    return acc / double(st.n);
}

// 2x2 average-pool downsample of a single-channel plane.
Tensor downsample2(const Tensor& x) {
    const int64_t H = x.dim(0) / 2, W = x.dim(1) / 2;
    Tensor out({H, W});
    for (int64_t i = 0; i < H; ++i)
        for (int64_t j = 0; j < W; ++j)
            out[i * W + j] = 0.25 * (x[(2 * i) * x.dim(1) + 2 * j] +
                                     x[(2 * i) * x.dim(1) + 2 * j + 1] +
                                     x[(2 * i + 1) * x.dim(1) + 2 * j] +
                                     x[(2 * i + 1) * x.dim(1) + 2 * j + 1]);
    return out;
}

template <class F>
double over_channels(const Tensor& y, const Tensor& y_gen, const WindowSpec& w, F&& f) {
    if (!w.per_channel) return f(to_luma8(y), to_luma8(y_gen));
    double acc = 0.0;
    for (int ch = 0; ch < 3; ++ch) acc += f(channel8(y, ch), channel8(y_gen, ch));
    return acc / 3.0;
}

}  // namespace

Tensor to_luma8(const Tensor& img) {
    const int64_t H = img.dim(0), W = img.dim(1);
    Tensor y({H, W});
    for (int64_t i = 0; i < H * W; ++i) {
        const double r = (img[i * 3] + 1.0) * 127.5;
        const double g = (img[i * 3 + 1] + 1.0) * 127.5;
        const double b = (img[i * 3 + 2] + 1.0) * 127.5;
        y[i] = 0.299 * r + 0.587 * g + 0.114 * b;
    }
    return y;
}

std::pair<double, double> mse_psnr(const Tensor& y, const Tensor& y_gen, double data_range) {
    check_same_shape(y, y_gen, "mse_psnr");
    if (!(data_range > 0.0)) throw std::invalid_argument("mse_psnr: data_range must be > 0");
    double mse = 0.0;
    for (int64_t i = 0; i < y.numel(); ++i) {
        const double d = y[i] - y_gen[i];
        mse += d * d;
    }
    mse /= double(y.numel());
    const double psnr = mse == 0.0 ? std::numeric_limits<double>::infinity()
                                   : 10.0 * std::log10(data_range * data_range / mse);
    return {mse, psnr};
}

SsimComponents ssim_decomposed(const Tensor& y, const Tensor& y_gen, const WindowSpec& window) {
    check_pair(y, y_gen, window);
    if (!window.per_channel) {
        return components_from_stats(windowed_stats(to_luma8(y), to_luma8(y_gen), window));
    }
    SsimComponents acc;
    for (int ch = 0; ch < 3; ++ch) {
        auto m = components_from_stats(windowed_stats(channel8(y, ch), channel8(y_gen, ch), window));
        acc.luminance += m.luminance / 3.0;
        acc.contrast += m.contrast / 3.0;
        acc.structure += m.structure / 3.0;
        acc.ssim += m.ssim / 3.0;
    }
    return acc;
}

double scm(const Tensor& y, const Tensor& y_gen, const WindowSpec& window) {
    check_pair(y, y_gen, window);
    return over_channels(y, y_gen, window, [&](Tensor a, Tensor b) {
        if (window.scales <= 1) return scm_from_stats(windowed_stats(a, b, window));
        // Dyadic multi-scale variant: weighted arithmetic mean of the
        // per-scale structure scores with the MS-SSIM scale weights.
        static const double kw[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
        double acc = 0.0, wsum = 0.0;
        for (int s = 0; s < std::min(window.scales, 5); ++s) {
            if (a.dim(0) < window.size || a.dim(1) < window.size) break;
            acc += kw[s] * scm_from_stats(windowed_stats(a, b, window));
            wsum += kw[s];
            a = downsample2(a);
            b = downsample2(b);
        }
        if (wsum == 0.0) throw std::invalid_argument("scm: image smaller than window");
        return acc / wsum;
    });
}

Tensor structure_corruption(const Tensor& y, int tile, double residual_gain,
                            bool identity_permutation, double sigma_min) {
    if (y.rank() != 3 || y.dim(2) != 3)
        throw std::invalid_argument("structure_corruption: expected [H,W,3]");
    if (identity_permutation) return y;
    const int64_t H = y.dim(0), W = y.dim(1);
    Tensor out = y;
    const Tensor luma = to_luma8(y);
    for (int64_t ti = 0; ti < H; ti += tile) {
        for (int64_t tj = 0; tj < W; tj += tile) {
            const int64_t th = std::min<int64_t>(tile, H - ti);
            const int64_t tw = std::min<int64_t>(tile, W - tj);
            const double n = double(th * tw);
            double lmean = 0.0, lsq = 0.0, cmean[3] = {0.0, 0.0, 0.0};
            for (int64_t i = 0; i < th; ++i)
                for (int64_t j = 0; j < tw; ++j) {
                    const int64_t px = (ti + i) * W + tj + j;
                    lmean += luma[px];
                    lsq += luma[px] * luma[px];
                    for (int ch = 0; ch < 3; ++ch) cmean[ch] += y[px * 3 + ch];
                }
            lmean /= n;
            // Flat tiles (background) are left untouched.
            if (std::sqrt(std::max(0.0, lsq / n - lmean * lmean)) < sigma_min) continue;
            for (double& m : cmean) m /= n;
            // Residuals around the per-channel tile mean are sign-inverted
            // and attenuated: tile means (luminance) are preserved exactly
            // while local structure becomes anti-correlated with the input.
            for (int64_t i = 0; i < th; ++i)
                for (int64_t j = 0; j < tw; ++j) {
                    const int64_t px = (ti + i) * W + tj + j;
                    for (int ch = 0; ch < 3; ++ch)
                        out[px * 3 + ch] =
                            cmean[ch] - residual_gain * (y[px * 3 + ch] - cmean[ch]);
                }
        }
    }
    for (auto& v : out.data) v = std::clamp(v, -1.0, 1.0);
    return out;
}

std::pair<double, double> luminance_bias_demo(const Tensor& y, const WindowSpec& window) {
    Tensor luma = to_luma8(y);
    int64_t white = 0;
    for (double v : luma.data)
        if (v >= 220.0) ++white;
    if (double(white) < 0.3 * double(luma.numel()))
        throw std::invalid_argument("luminance_bias_demo: needs >= 30% near-white background");
    Tensor corrupted = structure_corruption(y, 3 * window.size, 0.2, false, 8.0);
    return {ssim_decomposed(y, corrupted, window).ssim, scm(y, corrupted, window)};
}

double laplacian_energy(const Tensor& img) {
    Tensor y = to_luma8(img);
    const int64_t H = y.dim(0), W = y.dim(1);
    double acc = 0.0;
    int64_t n = 0;
    for (int64_t i = 1; i + 1 < H; ++i)
        for (int64_t j = 1; j + 1 < W; ++j) {
            const double v = 4.0 * y[i * W + j] - y[(i - 1) * W + j] - y[(i + 1) * W + j] -
                             y[i * W + j - 1] - y[i * W + j + 1];
            acc += std::fabs(v);
            ++n;
        }
    return acc / double(n);
}

namespace {

void write_value(std::ostream& os, double v) {
    if (std::isinf(v))
        os << (v > 0 ? "inf" : "-inf");
    else
        os << v;
}

MetricRow mean_of(const std::vector<const MetricRow*>& rows, const std::string& label) {
    MetricRow m;
    m.id = "mean";
    m.label = label;
    for (const auto* r : rows) {
        m.mse += r->mse;
        m.psnr += r->psnr;
        m.ssim += r->ssim;
        m.scm += r->scm;
    }
    const double n = double(rows.size());
    m.mse /= n;
    m.psnr /= n;
    m.ssim /= n;
    m.scm /= n;
    return m;
}

}  // namespace

MetricReport evaluate_corpus(const std::vector<CorpusPair>& pairs, const WindowSpec& window) {
    if (pairs.empty()) throw std::invalid_argument("evaluate_corpus: empty corpus");
    MetricReport rep;
    for (const auto& p : pairs) {
        MetricRow row;
        row.id = p.id;
        row.label = p.label.empty() ? "unlabeled" : p.label;
        try {
            Tensor g8 = to_luma8(p.generated), t8 = to_luma8(p.truth);  // shape check below
            check_same_shape(p.generated, p.truth, "evaluate_corpus");
            auto [mse, psnr] = mse_psnr(t8, g8, 255.0);
            row.mse = mse;
            row.psnr = psnr;
            row.ssim = ssim_decomposed(p.truth, p.generated, window).ssim;
            row.scm = scm(p.truth, p.generated, window);
        } catch (const std::exception& e) {
            row.ok = false;
            row.error = e.what();
        }
        rep.rows.push_back(std::move(row));
    }
    std::map<std::string, std::vector<const MetricRow*>> groups;
    std::vector<const MetricRow*> all;
    for (const auto& r : rep.rows) {
        if (!r.ok) continue;
        groups[r.label].push_back(&r);
        all.push_back(&r);
    }
    if (all.empty()) throw std::invalid_argument("evaluate_corpus: no evaluable pairs");
    for (const auto& [label, rows] : groups) rep.per_label_mean[label] = mean_of(rows, label);
    rep.overall_mean = mean_of(all, "overall");
    return rep;
}

void MetricReport::write_csv(std::ostream& os) const {
    os << "id,label,mse,psnr,ssim,scm\n";
    os << std::setprecision(10);
    for (const auto& r : rows) {
        if (!r.ok) continue;
        os << r.id << "," << r.label << "," << r.mse << ",";
        write_value(os, r.psnr);
        os << "," << r.ssim << "," << r.scm << "\n";
    }
}

void MetricReport::write_table(std::ostream& os) const {
    os << std::fixed << std::setprecision(4);
    os << "level        n          mse      psnr     ssim      scm\n";
    std::map<std::string, int64_t> counts;
    for (const auto& r : rows)
        if (r.ok) ++counts[r.label];
    auto line = [&](const std::string& label, int64_t n, const MetricRow& m) {
        os << std::left << std::setw(9) << label << std::right << std::setw(5) << n << " "
           << std::setw(12) << m.mse << " " << std::setw(9);
        if (std::isinf(m.psnr))
            os << "inf";
        else
            os << m.psnr;
        os << " " << std::setw(8) << m.ssim << " " << std::setw(8) << m.scm << "\n";
    };
    for (const auto& [label, m] : per_label_mean) line(label, counts[label], m);
    int64_t total = 0;
    for (const auto& [k, v] : counts) total += v;
    line("overall", total, overall_mean);
    int64_t failed = 0;
    for (const auto& r : rows)
        if (!r.ok) ++failed;
    if (failed > 0) os << failed << " pair(s) skipped due to errors\n";
}

}  // namespace vstain::metrics
