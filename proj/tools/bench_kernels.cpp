// Benchmarks the OpenMP kernels against their serial reference
// implementations and reports throughput plus max deviation.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <cstdio>
#include <random>
#include <vector>

#include "vstain/kernels.hpp"

using namespace vstain;
using clk = std::chrono::steady_clock;

namespace {

double time_of(const std::function<void()>& fn, int reps) {
    fn();  // warmup
    const auto t0 = clk::now();
    for (int r = 0; r < reps; ++r) fn();
    return std::chrono::duration<double>(clk::now() - t0).count() / reps;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

}  // namespace

int main() {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g(0.0, 1.0);
    auto fill = [&](std::vector<double>& v) {
        for (auto& x : v) x = g(rng);
    };

    std::printf("%-22s %10s %10s %8s %12s\n", "kernel", "serial(ms)", "omp(ms)", "speedup",
                "max|diff|");

    for (int64_t n : {128, 256, 512}) {
        std::vector<double> a(static_cast<size_t>(n * n)), b(static_cast<size_t>(n * n));
        std::vector<double> cs(static_cast<size_t>(n * n), 0.0), cp(static_cast<size_t>(n * n), 0.0);
        fill(a);
        fill(b);
        const int reps = n <= 256 ? 10 : 3;
        const double ts = time_of(
            [&] {
                std::fill(cs.begin(), cs.end(), 0.0);
                kernels::matmul_serial(a.data(), b.data(), cs.data(), n, n, n);
            },
            reps);
        const double tp = time_of(
            [&] {
                std::fill(cp.begin(), cp.end(), 0.0);
                kernels::matmul(a.data(), b.data(), cp.data(), n, n, n);
            },
            reps);
        std::printf("matmul %dx%-14d %10.3f %10.3f %8.2f %12.3e\n", int(n), int(n), ts * 1e3,
                    tp * 1e3, ts / tp, max_abs_diff(cs, cp));
    }

    {
        const int64_t h = 512, w = 512, k = 11;
        std::vector<double> img(static_cast<size_t>(h * w)), win(static_cast<size_t>(k), 1.0 / double(k));
        fill(img);
        const int64_t on = (h - k + 1) * (w - k + 1);
        std::vector<double> os(static_cast<size_t>(on)), op(static_cast<size_t>(on));
        const double ts = time_of(
            [&] { kernels::window_mean_serial(img.data(), h, w, win.data(), k, os.data()); }, 5);
        const double tp =
            time_of([&] { kernels::window_mean(img.data(), h, w, win.data(), k, op.data()); }, 5);
        std::printf("window_mean 512x512,11 %10.3f %10.3f %8.2f %12.3e\n", ts * 1e3, tp * 1e3,
                    ts / tp, max_abs_diff(os, op));
    }

    {
        const int64_t n = 1 << 22;
        std::vector<double> a(static_cast<size_t>(n)), b(static_cast<size_t>(n)), ys(static_cast<size_t>(n)), yp(static_cast<size_t>(n));
        fill(a);
        fill(b);
        const double ts =
            time_of([&] { kernels::hadamard_serial(a.data(), b.data(), ys.data(), n); }, 10);
        const double tp = time_of([&] { kernels::hadamard(a.data(), b.data(), yp.data(), n); }, 10);
        std::printf("hadamard 4M            %10.3f %10.3f %8.2f %12.3e\n", ts * 1e3, tp * 1e3,
                    ts / tp, max_abs_diff(ys, yp));
    }
    return 0;
}
