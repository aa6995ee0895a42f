#ifndef VSTAIN_METRICS_HPP
#define VSTAIN_METRICS_HPP

#include <iosfwd>
#include <map>
#include <utility>
#include <string>
#include <vector>

#include "vstain/tensor.hpp"

namespace vstain::metrics {

struct WindowSpec {
    int size = 11;
    double sigma = 1.5;
    enum class Kind { gaussian, uniform } kind = Kind::gaussian;
    bool per_channel = false;  // default: BT.601 luma before windowed stats
    int scales = 1;            // >1 enables the dyadic multi-scale SCM variant
};

struct SsimComponents {
    double luminance = 0.0;
    double contrast = 0.0;
    double structure = 0.0;
    double ssim = 0.0;
};

// mse over all elements and psnr = 10*log10(range^2/mse); psnr is +infinity
// when mse == 0.
std::pair<double, double> mse_psnr(const Tensor& y, const Tensor& y_gen, double data_range);

// Windowed SSIM with the classic constants K1=0.01, K2=0.03, C3=C2/2,
// computed in the 8-bit domain after denormalization from [-1,1].
// Inputs are [H,W,3] images in [-1,1].
SsimComponents ssim_decomposed(const Tensor& y, const Tensor& y_gen, const WindowSpec& window);

// Mean structure component over windows: (sigma_yy' + C)/(sigma_y sigma_y' + C)
// with C = C3.
double scm(const Tensor& y, const Tensor& y_gen, const WindowSpec& window);

// Structure-destroying, luminance-preserving corruption: per non-overlapping
// tile whose luma standard deviation reaches sigma_min, residuals around the
// per-channel tile mean are sign-inverted and attenuated by residual_gain,
// preserving the tile mean exactly. identity_permutation makes it a no-op.
Tensor structure_corruption(const Tensor& y, int tile, double residual_gain,
                            bool identity_permutation = false, double sigma_min = 0.0);

// Scores y against its corrupted copy; requires >= 30% near-white background.
std::pair<double, double> luminance_bias_demo(const Tensor& y, const WindowSpec& window);

// Mean absolute 4-neighbour Laplacian of the luma plane (high-frequency
// energy statistic).
double laplacian_energy(const Tensor& img);

struct MetricRow {
    std::string id;
    std::string label;
    double mse = 0.0, psnr = 0.0, ssim = 0.0, scm = 0.0;
    bool ok = true;
    std::string error;
};

struct MetricReport {
    std::vector<MetricRow> rows;
    std::map<std::string, MetricRow> per_label_mean;  // label -> means
    MetricRow overall_mean;

    void write_csv(std::ostream& os) const;
    void write_table(std::ostream& os) const;
};

struct CorpusPair {
    std::string id;
    std::string label;  // "0","1+","2+","3+" or "unlabeled"
    Tensor generated;
    Tensor truth;
};

// Per-image metrics plus per-label and overall means. Mismatched pairs are
// reported in their row and excluded from the means; an empty corpus throws.
MetricReport evaluate_corpus(const std::vector<CorpusPair>& pairs,
                             const WindowSpec& window = {});

// [H,W,3] in [-1,1] -> [H,W] luma in [0,255].
Tensor to_luma8(const Tensor& img);

}  // namespace vstain::metrics

#endif
