#ifndef VSTAIN_AUTODIFF_HPP
#define VSTAIN_AUTODIFF_HPP

#include <functional>
#include <memory>
#include <vector>

#include "vstain/tensor.hpp"

namespace vstain::ad {

// Eager reverse-mode autodiff. Values are computed at op construction;
// backward() walks the captured graph in reverse topological order.
struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
    Tensor value;
    Tensor grad;                 // allocated lazily, same shape as value
    bool requires_grad = false;  // leaf flag
    bool needs_grad = false;     // leaf flag or any parent needs it
    std::vector<Var> parents;
    std::function<void(Node&)> backward_fn;

    Tensor& ensure_grad() {
        // Size check matters for rank-0 scalars, whose default-constructed
        // grad already has the empty shape but no storage.
        if (grad.shape != value.shape || grad.data.size() != value.data.size())
            grad = Tensor::zeros(value.shape);
        return grad;
    }
    void zero_grad() {
        if (!grad.data.empty()) std::fill(grad.data.begin(), grad.data.end(), 0.0);
    }
};

Var constant(Tensor v);
Var param(Tensor v);

// Seeds the root gradient with ones (root is typically a scalar loss) and
// propagates to every reachable node with needs_grad.
void backward(const Var& root);

// ---- elementwise / broadcasting ----
// add and mul broadcast numpy-style; gradients sum-reduce over broadcast axes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var silu(const Var& a);
Var gelu(const Var& a);
Var tanh_(const Var& a);
Var abs_(const Var& a);  // subgradient 0 at exactly-zero entries

// ---- shape ----
Var reshape(const Var& a, std::vector<int64_t> shape);
Var slice_lastdim(const Var& a, int64_t start, int64_t len);
Var concat_lastdim(const Var& a, const Var& b);
Var broadcast_to(const Var& a, std::vector<int64_t> shape);

// ---- reductions ----
Var mean_all(const Var& a);
Var mean_axis1(const Var& a);  // [B,N,D] -> [B,D]

// ---- linear algebra ----
Var matmul2d(const Var& a, const Var& b);
// x[..., in] * w[in, out] + b[out]; pass nullptr for no bias.
Var linear(const Var& x, const Var& w, const Var& b);
// Layer normalization over the last axis, no learned affine.
Var layernorm(const Var& x, double eps = 1e-6);
// Fused multi-head attention: q[B,Nq,D], k/v[B,Nk,D], D divisible by heads.
Var multi_head_attention(const Var& q, const Var& k, const Var& v, int heads);

// Softmax cross-entropy over rows of logits[B,C] against integer labels.
Var softmax_cross_entropy(const Var& logits, const std::vector<int>& labels);

// ---- data movement ----
// [B,h,w,C] -> [B,(h/p)*(w/p), p*p*C], row-major patch scan.
Var patchify(const Var& x, int p);
// inverse of patchify for a known grid.
Var unpatchify(const Var& tokens, int64_t h, int64_t w, int64_t c, int p);

// Non-graph helpers mirroring the op layouts (used on plain tensors).
Tensor patchify_tensor(const Tensor& x, int p);
Tensor unpatchify_tensor(const Tensor& tokens, int64_t h, int64_t w, int64_t c, int p);

}  // namespace vstain::ad

#endif
