#include "vstain/kernels.hpp"

#include <vector>

namespace vstain::kernels {

void matmul_serial(const double* a, const double* b, double* c,
                   int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (int64_t p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = b + p * n;
            for (int64_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void matmul(const double* a, const double* b, double* c,
            int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (int64_t p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = b + p * n;
            for (int64_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void matmul_at_serial(const double* a, const double* b, double* c,
                      int64_t m, int64_t k, int64_t n) {
    for (int64_t p = 0; p < k; ++p) {
        const double* ap = a + p * m;
        const double* bp = b + p * n;
        for (int64_t i = 0; i < m; ++i) {
            const double av = ap[i];
            double* ci = c + i * n;
            for (int64_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void matmul_at(const double* a, const double* b, double* c,
               int64_t m, int64_t k, int64_t n) {
    // Parallelizing over i keeps each output row owned by one thread.
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        for (int64_t p = 0; p < k; ++p) {
            const double av = a[p * m + i];
            const double* bp = b + p * n;
            for (int64_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void matmul_bt_serial(const double* a, const double* b, double* c,
                      int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (int64_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            double acc = 0.0;
            for (int64_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] += acc;
        }
    }
}

void matmul_bt(const double* a, const double* b, double* c,
               int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (int64_t j = 0; j < n; ++j) {
            const double* bj = b + j * k;
            double acc = 0.0;
            for (int64_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] += acc;
        }
    }
}

void window_mean_serial(const double* img, int64_t h, int64_t w,
                        const double* win, int64_t k, double* out) {
    const int64_t oh = h - k + 1, ow = w - k + 1;
    for (int64_t i = 0; i < oh; ++i) {
        for (int64_t j = 0; j < ow; ++j) {
            double acc = 0.0;
            for (int64_t u = 0; u < k; ++u)
                for (int64_t v = 0; v < k; ++v)
                    acc += win[u] * win[v] * img[(i + u) * w + (j + v)];
            out[i * ow + j] = acc;
        }
    }
}

void window_mean(const double* img, int64_t h, int64_t w,
                 const double* win, int64_t k, double* out) {
    // Separable two-pass form; agrees with the naive reference to roundoff.
    const int64_t oh = h - k + 1, ow = w - k + 1;
    std::vector<double> tmp(static_cast<size_t>(h * ow));
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < h; ++i) {
        const double* row = img + i * w;
        double* trow = tmp.data() + i * ow;
        for (int64_t j = 0; j < ow; ++j) {
            double acc = 0.0;
            for (int64_t v = 0; v < k; ++v) acc += win[v] * row[j + v];
            trow[j] = acc;
        }
    }
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < oh; ++i) {
        double* orow = out + i * ow;
        for (int64_t j = 0; j < ow; ++j) {
            double acc = 0.0;
            for (int64_t u = 0; u < k; ++u) acc += win[u] * tmp[(i + u) * ow + j];
            orow[j] = acc;
        }
    }
}

void hadamard_serial(const double* a, const double* b, double* y, int64_t n) {
    for (int64_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

void hadamard(const double* a, const double* b, double* y, int64_t n) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

}  // namespace vstain::kernels
