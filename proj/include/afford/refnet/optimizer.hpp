#ifndef AFFORD_REFNET_OPTIMIZER_HPP_
#define AFFORD_REFNET_OPTIMIZER_HPP_

#include <vector>

#include "afford/refnet/model.hpp"

namespace afford::refnet {

struct OptimizerState {
  double learning_rate = 1e-3;
  double decay = 0.9;  // rho
  double epsilon = 1e-8;
  // Running mean of squared gradients, one buffer per parameter tensor.
  std::vector<std::vector<double>> mean_square;

  static OptimizerState for_params(const ModelParams& params, double learning_rate = 1e-3, double decay = 0.9,
                                   double epsilon = 1e-8);
};

// One entry per parameter tensor; true means the step leaves it alone.
using FrozenSet = std::vector<bool>;

FrozenSet nothing_frozen(const ModelParams& params);
FrozenSet encoder_frozen(const ModelParams& params);

// s <- rho s + (1 - rho) g^2;  theta <- theta - lr g / (sqrt(s) + eps)
void rmsprop_step(ModelParams& params, const ModelParams& grads, OptimizerState& state, const FrozenSet& frozen);

}  // namespace afford::refnet

#endif  // AFFORD_REFNET_OPTIMIZER_HPP_
