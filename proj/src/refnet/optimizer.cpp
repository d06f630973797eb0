#include "afford/refnet/optimizer.hpp"

#include <cmath>

#include "afford/core/errors.hpp"

namespace afford::refnet {

OptimizerState OptimizerState::for_params(const ModelParams& params, double learning_rate, double decay,
                                          double epsilon) {
  OptimizerState s{learning_rate, decay, epsilon, {}};
  s.mean_square.reserve(params.tensors.size());
  for (const auto& t : params.tensors) s.mean_square.emplace_back(t.values.size(), 0.0);
  return s;
}

FrozenSet nothing_frozen(const ModelParams& params) { return FrozenSet(params.tensors.size(), false); }

FrozenSet encoder_frozen(const ModelParams& params) {
  FrozenSet frozen(params.tensors.size(), false);
  for (std::size_t i = 0; i < params.tensors.size(); ++i) frozen[i] = params.tensors[i].encoder;
  return frozen;
}

void rmsprop_step(ModelParams& params, const ModelParams& grads, OptimizerState& state, const FrozenSet& frozen) {
  const std::size_t n = params.tensors.size();
  if (grads.tensors.size() != n || state.mean_square.size() != n || frozen.size() != n) {
    throw ArgumentError("rmsprop: parameter, gradient, state and frozen-set layouts differ");
  }
  for (std::size_t t = 0; t < n; ++t) {
    auto& theta = params.tensors[t].values;
    const auto& g = grads.tensors[t].values;
    auto& s = state.mean_square[t];
    if (g.size() != theta.size() || s.size() != theta.size()) throw ArgumentError("rmsprop: tensor sizes differ");
    if (frozen[t]) continue;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      s[i] = state.decay * s[i] + (1.0 - state.decay) * g[i] * g[i];
      theta[i] -= state.learning_rate * g[i] / (std::sqrt(s[i]) + state.epsilon);
    }
  }
}

}  // namespace afford::refnet
