#include "vstain/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace vstain::nn {

ad::Var ParamStore::add(const std::string& name, Tensor init) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
    auto v = ad::param(std::move(init));
    index_[name] = entries_.size();
    entries_.emplace_back(name, v);
    return v;
}

ad::Var ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
    return entries_[it->second].second;
}

void ParamStore::zero_grads() {
    for (auto& [name, v] : entries_) v->zero_grad();
}

int64_t ParamStore::total_elements() const {
    int64_t n = 0;
    for (const auto& [name, v] : entries_) n += v->value.numel();
    return n;
}

AdamW::AdamW(ParamStore& params, AdamWConfig cfg) : params_(params), cfg_(cfg) {
    for (const auto& [name, v] : params.entries()) {
        m_.push_back(Tensor::zeros(v->value.shape));
        v_.push_back(Tensor::zeros(v->value.shape));
    }
}

void AdamW::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    size_t pi = 0;
    for (auto& [name, p] : params_.entries()) {
        Tensor& m = m_[pi];
        Tensor& v = v_[pi];
        ++pi;
        if (p->grad.shape != p->value.shape) continue;  // never touched this step
        for (int64_t i = 0; i < p->value.numel(); ++i) {
            const double g = p->grad[i];
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            const double mh = m[i] / bc1;
            const double vh = v[i] / bc2;
            p->value[i] -= cfg_.lr * (mh / (std::sqrt(vh) + cfg_.eps) +
                                      cfg_.weight_decay * p->value[i]);
        }
    }
}

Ema::Ema(const ParamStore& params, double decay) : decay_(decay) {
    for (const auto& [name, v] : params.entries()) shadow_.push_back(v->value);
}

void Ema::update(const ParamStore& params) {
    size_t pi = 0;
    for (const auto& [name, v] : params.entries()) {
        Tensor& s = shadow_[pi++];
        for (int64_t i = 0; i < v->value.numel(); ++i)
            s[i] = decay_ * s[i] + (1.0 - decay_) * v->value[i];
    }
}

Tensor xavier_uniform(int64_t fan_in, int64_t fan_out, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
    return Tensor::rand_uniform({fan_in, fan_out}, rng, -limit, limit);
}

Tensor timestep_embedding(double t, int64_t dim) {
    Tensor out({dim});
    const int64_t half = dim / 2;
    for (int64_t i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * double(i) / double(half));
        out[2 * i] = std::sin(t * freq);
        out[2 * i + 1] = std::cos(t * freq);
    }
    return out;
}

Tensor pos_embed_2d(int64_t gh, int64_t gw, int64_t dim) {
    if (dim % 4 != 0) throw std::invalid_argument("pos_embed_2d: dim must be divisible by 4");
    Tensor out({gh * gw, dim});
    const int64_t quarter = dim / 4;
    for (int64_t r = 0; r < gh; ++r) {
        for (int64_t c = 0; c < gw; ++c) {
            double* row = out.ptr() + (r * gw + c) * dim;
            for (int64_t i = 0; i < quarter; ++i) {
                const double freq = std::exp(-std::log(10000.0) * double(i) / double(quarter));
                row[4 * i] = std::sin(double(r) * freq);
                row[4 * i + 1] = std::cos(double(r) * freq);
                row[4 * i + 2] = std::sin(double(c) * freq);
                row[4 * i + 3] = std::cos(double(c) * freq);
            }
        }
    }
    return out;
}

}  // namespace vstain::nn
