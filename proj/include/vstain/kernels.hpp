#ifndef VSTAIN_KERNELS_HPP
#define VSTAIN_KERNELS_HPP

#include <cstdint>

namespace vstain::kernels {

// C[m,n] += A[m,k] * B[k,n].  The _serial variants are the reference
// implementations; the unsuffixed ones are the OpenMP kernels used by the
// library.  The matmul pairs keep the same per-element accumulation order
// and agree bit-exactly; window_mean uses a separable pass and agrees to
// roundoff.  The kernel tests and the benchmark target check both.

void matmul_serial(const double* a, const double* b, double* c,
                   int64_t m, int64_t k, int64_t n);
void matmul(const double* a, const double* b, double* c,
            int64_t m, int64_t k, int64_t n);

// C[m,n] += A^T[m,k] * B[k,n] with A stored as [k,m].
void matmul_at_serial(const double* a, const double* b, double* c,
                      int64_t m, int64_t k, int64_t n);
void matmul_at(const double* a, const double* b, double* c,
               int64_t m, int64_t k, int64_t n);

// C[m,n] += A[m,k] * B^T[k,n] with B stored as [n,k].
void matmul_bt_serial(const double* a, const double* b, double* c,
                      int64_t m, int64_t k, int64_t n);
void matmul_bt(const double* a, const double* b, double* c,
               int64_t m, int64_t k, int64_t n);

// Valid-mode windowed weighted means of a single-channel image:
// out[i,j] = sum_{u,v} w[u]*w[v] * img[i+u, j+v], out size (h-k+1, w-k+1).
// `win` holds the separable 1-D weights of length k (already normalized).
void window_mean_serial(const double* img, int64_t h, int64_t w,
                        const double* win, int64_t k, double* out);
void window_mean(const double* img, int64_t h, int64_t w,
                 const double* win, int64_t k, double* out);

// y[i] = a[i]*b[i] elementwise, n elements.
void hadamard_serial(const double* a, const double* b, double* y, int64_t n);
void hadamard(const double* a, const double* b, double* y, int64_t n);

}  // namespace vstain::kernels

#endif
