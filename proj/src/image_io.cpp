#include "vstain/image_io.hpp"

#include <algorithm>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace vstain::io {

Tensor read_image(const std::string& path, int target_size) {
    cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
    if (bgr.empty()) throw std::runtime_error("read_image: cannot read " + path);
    if (target_size > 0 && (bgr.rows != target_size || bgr.cols != target_size))
        cv::resize(bgr, bgr, cv::Size(target_size, target_size), 0, 0, cv::INTER_LINEAR);
    Tensor out({bgr.rows, bgr.cols, 3});
    for (int i = 0; i < bgr.rows; ++i) {
        const auto* row = bgr.ptr<cv::Vec3b>(i);
        for (int j = 0; j < bgr.cols; ++j) {
            const int64_t base = (int64_t(i) * bgr.cols + j) * 3;
            out[base + 0] = double(row[j][2]) / 127.5 - 1.0;
            out[base + 1] = double(row[j][1]) / 127.5 - 1.0;
            out[base + 2] = double(row[j][0]) / 127.5 - 1.0;
        }
    }
    return out;
}

void write_image(const std::string& path, const Tensor& img) {
    if (img.rank() != 3 || img.dim(2) != 3)
        throw std::invalid_argument("write_image: expected [H,W,3]");
    const int H = int(img.dim(0)), W = int(img.dim(1));
    cv::Mat bgr(H, W, CV_8UC3);
    for (int i = 0; i < H; ++i) {
        auto* row = bgr.ptr<cv::Vec3b>(i);
        for (int j = 0; j < W; ++j) {
            const int64_t base = (int64_t(i) * W + j) * 3;
            for (int c = 0; c < 3; ++c) {
                const double v = std::clamp((img[base + 2 - c] + 1.0) * 127.5, 0.0, 255.0);
                row[j][c] = uchar(std::lround(v));
            }
        }
    }
    if (!cv::imwrite(path, bgr)) throw std::runtime_error("write_image: cannot write " + path);
}

}  // namespace vstain::io
