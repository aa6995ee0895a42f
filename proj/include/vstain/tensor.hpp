#ifndef VSTAIN_TENSOR_HPP
#define VSTAIN_TENSOR_HPP

#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace vstain {

// Dense row-major double tensor. Shapes are small vectors of extents;
// rank 0 is a scalar holding one element.
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int64_t> s, double fill = 0.0)
        : shape(std::move(s)), data(numel_of(shape), fill) {}

    static int64_t numel_of(const std::vector<int64_t>& s) {
        int64_t n = 1;
        for (int64_t d : s) {
            if (d < 0) throw std::invalid_argument("negative tensor extent");
            n *= d;
        }
        return n;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int64_t dim(int i) const { return shape.at(static_cast<size_t>(i)); }

    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }

    double& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

    // 2-D convenience accessors (row-major).
    double& at2(int64_t r, int64_t c) { return data[static_cast<size_t>(r * shape[1] + c)]; }
    double at2(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * shape[1] + c)]; }

    // 3-D convenience accessors.
    double& at3(int64_t a, int64_t b, int64_t c) {
        return data[static_cast<size_t>((a * shape[1] + b) * shape[2] + c)];
    }
    double at3(int64_t a, int64_t b, int64_t c) const {
        return data[static_cast<size_t>((a * shape[1] + b) * shape[2] + c)];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    Tensor reshaped(std::vector<int64_t> s) const {
        if (numel_of(s) != numel()) throw std::invalid_argument("reshape numel mismatch");
        Tensor t;
        t.shape = std::move(s);
        t.data = data;
        return t;
    }

    static Tensor zeros(std::vector<int64_t> s) { return Tensor(std::move(s), 0.0); }
    static Tensor full(std::vector<int64_t> s, double v) { return Tensor(std::move(s), v); }

    static Tensor randn(std::vector<int64_t> s, std::mt19937_64& rng, double stddev = 1.0) {
        Tensor t(std::move(s));
        std::normal_distribution<double> nd(0.0, stddev);
        for (auto& x : t.data) x = nd(rng);
        return t;
    }

    static Tensor rand_uniform(std::vector<int64_t> s, std::mt19937_64& rng,
                               double lo = 0.0, double hi = 1.0) {
        Tensor t(std::move(s));
        std::uniform_real_distribution<double> ud(lo, hi);
        for (auto& x : t.data) x = ud(rng);
        return t;
    }
};

std::string shape_str(const std::vector<int64_t>& s);

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                    shape_str(a.shape) + " vs " + shape_str(b.shape));
}

}  // namespace vstain

#endif
