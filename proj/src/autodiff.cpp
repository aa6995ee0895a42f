#include "vstain/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

#include "vstain/kernels.hpp"

namespace vstain::ad {

namespace {

Var make_node(Tensor value, std::vector<Var> parents,
              std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
    for (const auto& p : n->parents)
        if (p->needs_grad) n->needs_grad = true;
    return n;
}

// numpy-style broadcast of two shapes.
std::vector<int64_t> broadcast_shape(const std::vector<int64_t>& a,
                                     const std::vector<int64_t>& b) {
    const size_t r = std::max(a.size(), b.size());
    std::vector<int64_t> out(r);
    for (size_t i = 0; i < r; ++i) {
        int64_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
        int64_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
        if (da != db && da != 1 && db != 1)
            throw std::invalid_argument("broadcast: incompatible shapes " +
                                        shape_str(a) + " vs " + shape_str(b));
        out[i] = std::max(da, db);
    }
    return out;
}

// Row-major strides padded to rank r, with stride 0 on broadcast axes.
std::vector<int64_t> broadcast_strides(const std::vector<int64_t>& shape, size_t r) {
    std::vector<int64_t> st(r, 0);
    int64_t acc = 1;
    for (size_t i = shape.size(); i-- > 0;) {
        st[i + (r - shape.size())] = shape[i] == 1 ? 0 : acc;
        acc *= shape[i];
    }
    return st;
}

template <class F>
void broadcast_apply(const Tensor& a, const Tensor& b,
                     const std::vector<int64_t>& out_shape, F&& f) {
    const size_t r = out_shape.size();
    auto sa = broadcast_strides(a.shape, r);
    auto sb = broadcast_strides(b.shape, r);
    std::vector<int64_t> idx(r, 0);
    const int64_t n = Tensor::numel_of(out_shape);
    int64_t ia = 0, ib = 0;
    for (int64_t i = 0; i < n; ++i) {
        f(i, ia, ib);
        for (size_t d = r; d-- > 0;) {
            ++idx[d];
            ia += sa[d];
            ib += sb[d];
            if (idx[d] < out_shape[d]) break;
            ia -= sa[d] * out_shape[d];
            ib -= sb[d] * out_shape[d];
            idx[d] = 0;
        }
    }
}

// Sum-reduce g (shaped like out) into a gradient shaped like target.
void reduce_into(const Tensor& g, Tensor& target_grad) {
    if (g.shape == target_grad.shape) {
        for (int64_t i = 0; i < g.numel(); ++i) target_grad[i] += g[i];
        return;
    }
    const size_t r = g.shape.size();
    auto st = broadcast_strides(target_grad.shape, r);
    std::vector<int64_t> idx(r, 0);
    int64_t it = 0;
    for (int64_t i = 0; i < g.numel(); ++i) {
        target_grad[it] += g[i];
        for (size_t d = r; d-- > 0;) {
            ++idx[d];
            it += st[d];
            if (idx[d] < g.shape[d]) break;
            it -= st[d] * g.shape[d];
            idx[d] = 0;
        }
    }
}

Var binary_broadcast(const Var& a, const Var& b, double (*fwd)(double, double),
                     void (*bwd)(double ga, double va, double vb, double& da, double& db)) {
    auto out_shape = broadcast_shape(a->value.shape, b->value.shape);
    Tensor out(out_shape);
    broadcast_apply(a->value, b->value, out_shape,
                    [&](int64_t i, int64_t ia, int64_t ib) {
                        out[i] = fwd(a->value[ia], b->value[ib]);
                    });
    return make_node(std::move(out), {a, b}, [fwd, bwd](Node& n) {
        const Var& a = n.parents[0];
        const Var& b = n.parents[1];
        Tensor ga(n.value.shape), gb(n.value.shape);
        broadcast_apply(a->value, b->value, n.value.shape,
                        [&](int64_t i, int64_t ia, int64_t ib) {
                            bwd(n.grad[i], a->value[ia], b->value[ib], ga[i], gb[i]);
                        });
        if (a->needs_grad) reduce_into(ga, a->ensure_grad());
        if (b->needs_grad) reduce_into(gb, b->ensure_grad());
    });
}

Var unary_op(const Var& a, double (*fwd)(double), double (*dfdx)(double)) {
    Tensor out(a->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = fwd(a->value[i]);
    return make_node(std::move(out), {a}, [dfdx](Node& n) {
        const Var& a = n.parents[0];
        if (!a->needs_grad) return;
        Tensor& g = a->ensure_grad();
        for (int64_t i = 0; i < n.value.numel(); ++i)
            g[i] += n.grad[i] * dfdx(a->value[i]);
    });
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Var constant(Tensor v) { return make_node(std::move(v), {}, nullptr); }

Var param(Tensor v) {
    auto n = make_node(std::move(v), {}, nullptr);
    n->requires_grad = true;
    n->needs_grad = true;
    return n;
}

void backward(const Var& root) {
    // Iterative post-order topo sort.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* par = node->parents[next++].get();
            if (par->needs_grad && !visited.count(par)) {
                visited.insert(par);
                stack.emplace_back(par, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    Tensor& g = root->ensure_grad();
    std::fill(g.data.begin(), g.data.end(), 1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && n->needs_grad) n->backward_fn(*n);
    }
}

Var add(const Var& a, const Var& b) {
    return binary_broadcast(
        a, b, [](double x, double y) { return x + y; },
        [](double g, double, double, double& da, double& db) {
            da = g;
            db = g;
        });
}

Var sub(const Var& a, const Var& b) {
    return binary_broadcast(
        a, b, [](double x, double y) { return x - y; },
        [](double g, double, double, double& da, double& db) {
            da = g;
            db = -g;
        });
}

Var mul(const Var& a, const Var& b) {
    return binary_broadcast(
        a, b, [](double x, double y) { return x * y; },
        [](double g, double x, double y, double& da, double& db) {
            da = g * y;
            db = g * x;
        });
}

Var scale(const Var& a, double s) {
    Tensor out(a->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * s;
    return make_node(std::move(out), {a}, [s](Node& n) {
        const Var& a = n.parents[0];
        if (!a->needs_grad) return;
        Tensor& g = a->ensure_grad();
        for (int64_t i = 0; i < n.value.numel(); ++i) g[i] += n.grad[i] * s;
    });
}

Var add_scalar(const Var& a, double s) {
    Tensor out(a->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + s;
    return make_node(std::move(out), {a}, [](Node& n) {
        const Var& a = n.parents[0];
        if (!a->needs_grad) return;
        Tensor& g = a->ensure_grad();
        for (int64_t i = 0; i < n.value.numel(); ++i) g[i] += n.grad[i];
    });
}

Var silu(const Var& a) {
    return unary_op(
        a, [](double x) { return x * sigmoid(x); },
        [](double x) {
            const double s = sigmoid(x);
            return s * (1.0 + x * (1.0 - s));
        });
}

Var gelu(const Var& a) {
    return unary_op(
        a, [](double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); },
        [](double x) {
            const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
            const double pdf = std::exp(-0.5 * x * x) * 0.3989422804014327;
            return cdf + x * pdf;
        });
}

Var tanh_(const Var& a) {
    return unary_op(
        a, [](double x) { return std::tanh(x); },
        [](double x) {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        });
}

Var abs_(const Var& a) {
    return unary_op(
        a, [](double x) { return std::fabs(x); },
        [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var reshape(const Var& a, std::vector<int64_t> shape) {
    Tensor out = a->value.reshaped(std::move(shape));
    return make_node(std::move(out), {a}, [](Node& n) {
        const Var& a = n.parents[0];
        if (!a->needs_grad) return;
        Tensor& g = a->ensure_grad();
        for (int64_t i = 0; i < n.value.numel(); ++i) g[i] += n.grad[i];
    });
}

Var slice_lastdim(const Var& a, int64_t start, int64_t len) {
    const auto& s = a->value.shape;
    const int64_t last = s.back();
    if (start < 0 || start + len > last) throw std::invalid_argument("slice out of range");
    std::vector<int64_t> os = s;
    os.back() = len;
    Tensor out(os);
    const int64_t rows = a->value.numel() / last;
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < len; ++j) out[r * len + j] = a->value[r * last + start + j];
    return make_node(std::move(out), {a}, [start, len, last](Node& n) {
        const Var& a = n.parents[0];
        if (!a->needs_grad) return;
        Tensor& g = a->ensure_grad();
        const int64_t rows = a->value.numel() / last;
        for (int64_t r = 0; r < rows; ++r)
            for (int64_t j = 0; j < len; ++j) g[r * last + start + j] += n.grad[r * len + j];
    });
}

Var concat_lastdim(const Var& a, const Var& b) {
    const auto& sa = a->value.shape;
    const auto& sb = b->value.shape;
    if (sa.size() != sb.size()) throw std::invalid_argument("concat: rank mismatch");
    for (size_t i = 0; i + 1 < sa.size(); ++i)
        if (sa[i] != sb[i]) throw std::invalid_argument("concat: leading dims differ");
    const int64_t la = sa.back(), lb = sb.back();
    std::vector<int64_t> os = sa;
    os.back() = la + lb;
    Tensor out(os);
    const int64_t rows = a->value.numel() / la;
    for (int64_t r = 0; r < rows; ++r) {
        for (int64_t j = 0; j < la; ++j) out[r * (la + lb) + j] = a->value[r * la + j];
        for (int64_t j = 0; j < lb; ++j) out[r * (la + lb) + la + j] = b->value[r * lb + j];
    }
    return make_node(std::move(out), {a, b}, [la, lb](Node& n) {
        const Var& a = n.parents[0];
        const Var& b = n.parents[1];
        const int64_t rows = a->value.numel() / la;
        if (a->needs_grad) {
            Tensor& g = a->ensure_grad();
            for (int64_t r = 0; r < rows; ++r)
                for (int64_t j = 0; j < la; ++j) g[r * la + j] += n.grad[r * (la + lb) + j];
        }
        if (b->needs_grad) {
            Tensor& g = b->ensure_grad();
            for (int64_t r = 0; r < rows; ++r)
                for (int64_t j = 0; j < lb; ++j) g[r * lb + j] += n.grad[r * (la + lb) + la + j];
        }
    });
}

Var broadcast_to(const Var& a, std::vector<int64_t> shape) {
    auto bs = broadcast_shape(a->value.shape, shape);
    if (bs != shape) throw std::invalid_argument("broadcast_to: shape not reachable");
    Tensor out(shape);
    broadcast_apply(a->value, out, shape,
                    [&](int64_t i, int64_t ia, int64_t) { out[i] = a->value[ia]; });
    return make_node(std::move(out), {a}, [](Node& n) {
        const Var& a = n.parents[0];
        if (!a->needs_grad) return;
        reduce_into(n.grad, a->ensure_grad());
    });
}

Var mean_all(const Var& a) {
    const int64_t n = a->value.numel();
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) acc += a->value[i];
    Tensor out(std::vector<int64_t>{});
    out.data = {acc / static_cast<double>(n)};
    return make_node(std::move(out), {a}, [n](Node& nd) {
        const Var& a = nd.parents[0];
        if (!a->needs_grad) return;
        Tensor& g = a->ensure_grad();
        const double gv = nd.grad[0] / static_cast<double>(n);
        for (int64_t i = 0; i < n; ++i) g[i] += gv;
    });
}

Var mean_axis1(const Var& a) {
    if (a->value.rank() != 3) throw std::invalid_argument("mean_axis1 expects rank 3");
    const int64_t B = a->value.dim(0), N = a->value.dim(1), D = a->value.dim(2);
    Tensor out({B, D});
    for (int64_t b = 0; b < B; ++b)
        for (int64_t n = 0; n < N; ++n)
            for (int64_t d = 0; d < D; ++d) out.at2(b, d) += a->value.at3(b, n, d) / double(N);
    return make_node(std::move(out), {a}, [B, N, D](Node& nd) {
        const Var& a = nd.parents[0];
        if (!a->needs_grad) return;
        Tensor& g = a->ensure_grad();
        for (int64_t b = 0; b < B; ++b)
            for (int64_t n = 0; n < N; ++n)
                for (int64_t d = 0; d < D; ++d)
                    g[(b * N + n) * D + d] += nd.grad[b * D + d] / double(N);
    });
}

Var matmul2d(const Var& a, const Var& b) {
    if (a->value.rank() != 2 || b->value.rank() != 2 || a->value.dim(1) != b->value.dim(0))
        throw std::invalid_argument("matmul2d shape mismatch");
    const int64_t m = a->value.dim(0), k = a->value.dim(1), n = b->value.dim(1);
    Tensor out({m, n});
    kernels::matmul(a->value.ptr(), b->value.ptr(), out.ptr(), m, k, n);
    return make_node(std::move(out), {a, b}, [m, k, n](Node& nd) {
        const Var& a = nd.parents[0];
        const Var& b = nd.parents[1];
        if (a->needs_grad)
            kernels::matmul_bt(nd.grad.ptr(), b->value.ptr(), a->ensure_grad().ptr(), m, n, k);
        if (b->needs_grad)
            kernels::matmul_at(a->value.ptr(), nd.grad.ptr(), b->ensure_grad().ptr(), k, m, n);
    });
}

Var linear(const Var& x, const Var& w, const Var& b) {
    const int64_t in = w->value.dim(0), out_dim = w->value.dim(1);
    if (x->value.shape.back() != in) throw std::invalid_argument("linear width mismatch");
    const int64_t M = x->value.numel() / in;
    std::vector<int64_t> os = x->value.shape;
    os.back() = out_dim;
    Tensor out(os);
    kernels::matmul(x->value.ptr(), w->value.ptr(), out.ptr(), M, in, out_dim);
    if (b) {
        if (b->value.numel() != out_dim) throw std::invalid_argument("linear bias mismatch");
        for (int64_t r = 0; r < M; ++r)
            for (int64_t j = 0; j < out_dim; ++j) out[r * out_dim + j] += b->value[j];
    }
    std::vector<Var> parents = b ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
    return make_node(std::move(out), std::move(parents), [M, in, out_dim](Node& nd) {
        const Var& x = nd.parents[0];
        const Var& w = nd.parents[1];
        if (x->needs_grad)
            kernels::matmul_bt(nd.grad.ptr(), w->value.ptr(), x->ensure_grad().ptr(), M, out_dim, in);
        if (w->needs_grad)
            kernels::matmul_at(x->value.ptr(), nd.grad.ptr(), w->ensure_grad().ptr(), in, M, out_dim);
        if (nd.parents.size() == 3 && nd.parents[2]->needs_grad) {
            Tensor& gb = nd.parents[2]->ensure_grad();
            for (int64_t r = 0; r < M; ++r)
                for (int64_t j = 0; j < out_dim; ++j) gb[j] += nd.grad[r * out_dim + j];
        }
    });
}

Var layernorm(const Var& x, double eps) {
    const int64_t D = x->value.shape.back();
    const int64_t rows = x->value.numel() / D;
    Tensor out(x->value.shape);
    // Saved per-row inverse stddev rides in a side tensor via capture.
    auto inv_std = std::make_shared<std::vector<double>>(rows);
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = x->value.ptr() + r * D;
        double mu = 0.0;
        for (int64_t j = 0; j < D; ++j) mu += xr[j];
        mu /= double(D);
        double var = 0.0;
        for (int64_t j = 0; j < D; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var /= double(D);
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[r] = is;
        double* orow = out.ptr() + r * D;
        for (int64_t j = 0; j < D; ++j) orow[j] = (xr[j] - mu) * is;
    }
    return make_node(std::move(out), {x}, [D, rows, inv_std](Node& nd) {
        const Var& x = nd.parents[0];
        if (!x->needs_grad) return;
        Tensor& g = x->ensure_grad();
        for (int64_t r = 0; r < rows; ++r) {
            const double* yr = nd.value.ptr() + r * D;  // normalized values
            const double* gr = nd.grad.ptr() + r * D;
            double sum_g = 0.0, sum_gy = 0.0;
            for (int64_t j = 0; j < D; ++j) {
                sum_g += gr[j];
                sum_gy += gr[j] * yr[j];
            }
            const double is = (*inv_std)[r];
            double* gx = g.ptr() + r * D;
            for (int64_t j = 0; j < D; ++j)
                gx[j] += is * (gr[j] - sum_g / double(D) - yr[j] * sum_gy / double(D));
        }
    });
}

Var multi_head_attention(const Var& q, const Var& k, const Var& v, int heads) {
    const auto& qs = q->value.shape;
    const auto& ks = k->value.shape;
    if (qs.size() != 3 || ks.size() != 3 || !k->value.same_shape(v->value) ||
        qs[0] != ks[0] || qs[2] != ks[2])
        throw std::invalid_argument("attention shape mismatch");
    const int64_t B = qs[0], Nq = qs[1], Nk = ks[1], D = qs[2];
    if (D % heads != 0) throw std::invalid_argument("attention: D not divisible by heads");
    const int64_t dh = D / heads;
    const double inv_sqrt = 1.0 / std::sqrt(double(dh));

    auto attn = std::make_shared<Tensor>(std::vector<int64_t>{B, heads, Nq, Nk});
    Tensor out({B, Nq, D});
    for (int64_t b = 0; b < B; ++b) {
        for (int64_t h = 0; h < heads; ++h) {
            const int64_t off = h * dh;
            double* A = attn->ptr() + ((b * heads + h) * Nq) * Nk;
            for (int64_t i = 0; i < Nq; ++i) {
                const double* qi = q->value.ptr() + (b * Nq + i) * D + off;
                double mx = -1e300;
                for (int64_t j = 0; j < Nk; ++j) {
                    const double* kj = k->value.ptr() + (b * Nk + j) * D + off;
                    double s = 0.0;
                    for (int64_t d = 0; d < dh; ++d) s += qi[d] * kj[d];
                    s *= inv_sqrt;
                    A[i * Nk + j] = s;
                    mx = std::max(mx, s);
                }
                double z = 0.0;
                for (int64_t j = 0; j < Nk; ++j) {
                    A[i * Nk + j] = std::exp(A[i * Nk + j] - mx);
                    z += A[i * Nk + j];
                }
                double* oi = out.ptr() + (b * Nq + i) * D + off;
                for (int64_t j = 0; j < Nk; ++j) {
                    A[i * Nk + j] /= z;
                    const double* vj = v->value.ptr() + (b * Nk + j) * D + off;
                    const double a = A[i * Nk + j];
                    for (int64_t d = 0; d < dh; ++d) oi[d] += a * vj[d];
                }
            }
        }
    }
    return make_node(std::move(out), {q, k, v},
                     [B, Nq, Nk, D, heads, dh, inv_sqrt, attn](Node& nd) {
        const Var& q = nd.parents[0];
        const Var& k = nd.parents[1];
        const Var& v = nd.parents[2];
        const bool gq = q->needs_grad, gk = k->needs_grad, gv = v->needs_grad;
        if (gq) q->ensure_grad();
        if (gk) k->ensure_grad();
        if (gv) v->ensure_grad();
        std::vector<double> dA(static_cast<size_t>(Nk));
        for (int64_t b = 0; b < B; ++b) {
            for (int64_t h = 0; h < heads; ++h) {
                const int64_t off = h * dh;
                const double* A = attn->ptr() + ((b * heads + h) * Nq) * Nk;
                for (int64_t i = 0; i < Nq; ++i) {
                    const double* go = nd.grad.ptr() + (b * Nq + i) * D + off;
                    const double* Ai = A + i * Nk;
                    // dV and dA
                    double dot = 0.0;
                    for (int64_t j = 0; j < Nk; ++j) {
                        const double* vj = v->value.ptr() + (b * Nk + j) * D + off;
                        double s = 0.0;
                        for (int64_t d = 0; d < dh; ++d) s += go[d] * vj[d];
                        dA[static_cast<size_t>(j)] = s;
                        dot += s * Ai[j];
                        if (gv) {
                            double* gvj = v->grad.ptr() + (b * Nk + j) * D + off;
                            for (int64_t d = 0; d < dh; ++d) gvj[d] += Ai[j] * go[d];
                        }
                    }
                    if (!gq && !gk) continue;
                    const double* qi = q->value.ptr() + (b * Nq + i) * D + off;
                    double* gqi = gq ? q->grad.ptr() + (b * Nq + i) * D + off : nullptr;
                    for (int64_t j = 0; j < Nk; ++j) {
                        const double dS = Ai[j] * (dA[static_cast<size_t>(j)] - dot) * inv_sqrt;
                        const double* kj = k->value.ptr() + (b * Nk + j) * D + off;
                        if (gq)
                            for (int64_t d = 0; d < dh; ++d) gqi[d] += dS * kj[d];
                        if (gk) {
                            double* gkj = k->grad.ptr() + (b * Nk + j) * D + off;
                            for (int64_t d = 0; d < dh; ++d) gkj[d] += dS * qi[d];
                        }
                    }
                }
            }
        }
    });
}

Var softmax_cross_entropy(const Var& logits, const std::vector<int>& labels) {
    const int64_t B = logits->value.dim(0), C = logits->value.dim(1);
    if (static_cast<int64_t>(labels.size()) != B)
        throw std::invalid_argument("label count mismatch");
    auto probs = std::make_shared<Tensor>(std::vector<int64_t>{B, C});
    double loss = 0.0;
    for (int64_t b = 0; b < B; ++b) {
        const double* lr = logits->value.ptr() + b * C;
        double mx = lr[0];
        for (int64_t c = 1; c < C; ++c) mx = std::max(mx, lr[c]);
        double z = 0.0;
        for (int64_t c = 0; c < C; ++c) z += std::exp(lr[c] - mx);
        for (int64_t c = 0; c < C; ++c) probs->at2(b, c) = std::exp(lr[c] - mx) / z;
        loss += -(lr[labels[static_cast<size_t>(b)]] - mx - std::log(z));
    }
    Tensor out(std::vector<int64_t>{});
    out.data = {loss / double(B)};
    auto lbl = labels;
    return make_node(std::move(out), {logits}, [B, C, probs, lbl](Node& nd) {
        const Var& x = nd.parents[0];
        if (!x->needs_grad) return;
        Tensor& g = x->ensure_grad();
        const double gv = nd.grad[0] / double(B);
        for (int64_t b = 0; b < B; ++b)
            for (int64_t c = 0; c < C; ++c) {
                double p = probs->at2(b, c);
                if (c == lbl[static_cast<size_t>(b)]) p -= 1.0;
                g[b * C + c] += gv * p;
            }
    });
}

namespace {

// Destination-major index map: dst[i] = src[map[i]] for one batch item.
std::vector<int64_t> patch_map(int64_t h, int64_t w, int64_t c, int p) {
    const int64_t gh = h / p, gw = w / p;
    std::vector<int64_t> map(static_cast<size_t>(h * w * c));
    int64_t dst = 0;
    for (int64_t gi = 0; gi < gh; ++gi)
        for (int64_t gj = 0; gj < gw; ++gj)
            for (int64_t pi = 0; pi < p; ++pi)
                for (int64_t pj = 0; pj < p; ++pj)
                    for (int64_t ch = 0; ch < c; ++ch)
                        map[static_cast<size_t>(dst++)] =
                            ((gi * p + pi) * w + (gj * p + pj)) * c + ch;
    return map;
}

}  // namespace

Tensor patchify_tensor(const Tensor& x, int p) {
    if (x.rank() != 4) throw std::invalid_argument("patchify expects [B,h,w,C]");
    const int64_t B = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    if (h % p != 0 || w % p != 0)
        throw std::invalid_argument("patchify: spatial dims not divisible by patch size");
    auto map = patch_map(h, w, c, p);
    const int64_t per = h * w * c, N = (h / p) * (w / p);
    Tensor out({B, N, static_cast<int64_t>(p) * p * c});
    for (int64_t b = 0; b < B; ++b)
        for (int64_t i = 0; i < per; ++i) out[b * per + i] = x[b * per + map[static_cast<size_t>(i)]];
    return out;
}

Tensor unpatchify_tensor(const Tensor& tokens, int64_t h, int64_t w, int64_t c, int p) {
    const int64_t B = tokens.dim(0);
    if (tokens.numel() != B * h * w * c) throw std::invalid_argument("unpatchify numel mismatch");
    auto map = patch_map(h, w, c, p);
    const int64_t per = h * w * c;
    Tensor out({B, h, w, c});
    for (int64_t b = 0; b < B; ++b)
        for (int64_t i = 0; i < per; ++i) out[b * per + map[static_cast<size_t>(i)]] = tokens[b * per + i];
    return out;
}

Var patchify(const Var& x, int p) {
    Tensor out = patchify_tensor(x->value, p);
    const int64_t h = x->value.dim(1), w = x->value.dim(2), c = x->value.dim(3);
    return make_node(std::move(out), {x}, [h, w, c, p](Node& nd) {
        const Var& x = nd.parents[0];
        if (!x->needs_grad) return;
        Tensor& g = x->ensure_grad();
        auto map = patch_map(h, w, c, p);
        const int64_t B = x->value.dim(0), per = h * w * c;
        for (int64_t b = 0; b < B; ++b)
            for (int64_t i = 0; i < per; ++i)
                g[b * per + map[static_cast<size_t>(i)]] += nd.grad[b * per + i];
    });
}

Var unpatchify(const Var& tokens, int64_t h, int64_t w, int64_t c, int p) {
    Tensor out = unpatchify_tensor(tokens->value, h, w, c, p);
    auto tok_shape = tokens->value.shape;
    return make_node(std::move(out), {tokens}, [h, w, c, p](Node& nd) {
        const Var& t = nd.parents[0];
        if (!t->needs_grad) return;
        Tensor& g = t->ensure_grad();
        auto map = patch_map(h, w, c, p);
        const int64_t B = t->value.dim(0), per = h * w * c;
        for (int64_t b = 0; b < B; ++b)
            for (int64_t i = 0; i < per; ++i)
                g[b * per + i] += nd.grad[b * per + map[static_cast<size_t>(i)]];
    });
}

}  // namespace vstain::ad
