#include "vstain/objective.hpp"

#include <cmath>
#include <stdexcept>

namespace vstain {

double hybrid_loss(const Tensor& eps_true, const Tensor& eps_pred, const LossWeights& w) {
    check_same_shape(eps_true, eps_pred, "hybrid_loss");
    if (!(w.lambda_mse + w.lambda_l1 > 0.0))
        throw std::invalid_argument("hybrid_loss: weights must not both be zero");
    double mse = 0.0, l1 = 0.0;
    const int64_t n = eps_true.numel();
    for (int64_t i = 0; i < n; ++i) {
        const double d = eps_true[i] - eps_pred[i];
        mse += d * d;
        l1 += std::fabs(d);
    }
    return w.lambda_mse * mse / double(n) + w.lambda_l1 * l1 / double(n);
}

ad::Var hybrid_loss_graph(const Tensor& eps_true, const ad::Var& eps_pred, const LossWeights& w) {
    check_same_shape(eps_true, eps_pred->value, "hybrid_loss");
    if (!(w.lambda_mse + w.lambda_l1 > 0.0))
        throw std::invalid_argument("hybrid_loss: weights must not both be zero");
    auto diff = ad::sub(ad::constant(eps_true), eps_pred);
    auto mse = ad::mean_all(ad::mul(diff, diff));
    auto l1 = ad::mean_all(ad::abs_(diff));
    return ad::add(ad::scale(mse, w.lambda_mse), ad::scale(l1, w.lambda_l1));
}

}  // namespace vstain
