#ifndef VSTAIN_OBJECTIVE_HPP
#define VSTAIN_OBJECTIVE_HPP

#include "vstain/autodiff.hpp"
#include "vstain/tensor.hpp"

namespace vstain {

struct LossWeights {
    double lambda_mse = 0.7;
    double lambda_l1 = 0.3;
};

// lambda_mse * mean((a-b)^2) + lambda_l1 * mean(|a-b|), mean over all elements.
// The L1 subgradient at exactly-zero residuals is 0.
double hybrid_loss(const Tensor& eps_true, const Tensor& eps_pred, const LossWeights& w);

// Graph form for training; eps_true is a constant.
ad::Var hybrid_loss_graph(const Tensor& eps_true, const ad::Var& eps_pred, const LossWeights& w);

}  // namespace vstain

#endif
