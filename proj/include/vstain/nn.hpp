#ifndef VSTAIN_NN_HPP
#define VSTAIN_NN_HPP

#include <map>
#include <string>
#include <vector>

#include "vstain/autodiff.hpp"

namespace vstain::nn {

// Named parameter registry with deterministic iteration order.
class ParamStore {
public:
    ad::Var add(const std::string& name, Tensor init);
    ad::Var get(const std::string& name) const;
    bool has(const std::string& name) const { return index_.count(name) != 0; }

    const std::vector<std::pair<std::string, ad::Var>>& entries() const { return entries_; }
    void zero_grads();
    int64_t total_elements() const;

private:
    std::vector<std::pair<std::string, ad::Var>> entries_;
    std::map<std::string, size_t> index_;
};

struct AdamWConfig {
    double lr = 3e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// AdamW with decoupled weight decay.
class AdamW {
public:
    AdamW(ParamStore& params, AdamWConfig cfg);
    void step();
    int64_t step_count() const { return t_; }

    // Serialization access: first/second moment per parameter, by store order.
    std::vector<Tensor>& moments_m() { return m_; }
    std::vector<Tensor>& moments_v() { return v_; }
    const std::vector<Tensor>& moments_m() const { return m_; }
    const std::vector<Tensor>& moments_v() const { return v_; }
    void set_step_count(int64_t t) { t_ = t; }

private:
    ParamStore& params_;
    AdamWConfig cfg_;
    std::vector<Tensor> m_, v_;
    int64_t t_ = 0;
};

// Exponential moving average of parameter values.
class Ema {
public:
    Ema(const ParamStore& params, double decay);
    void update(const ParamStore& params);
    const std::vector<Tensor>& shadows() const { return shadow_; }
    std::vector<Tensor>& shadows() { return shadow_; }
    double decay() const { return decay_; }

private:
    double decay_;
    std::vector<Tensor> shadow_;
};

// Xavier/Glorot-uniform init for a [fan_in, fan_out] weight.
Tensor xavier_uniform(int64_t fan_in, int64_t fan_out, std::mt19937_64& rng);

// Sinusoidal embedding of a scalar timestep into `dim` features.
Tensor timestep_embedding(double t, int64_t dim);

// Fixed 2-D sinusoidal positional table for a (gh x gw) grid, [gh*gw, dim].
Tensor pos_embed_2d(int64_t gh, int64_t gw, int64_t dim);

}  // namespace vstain::nn

#endif
