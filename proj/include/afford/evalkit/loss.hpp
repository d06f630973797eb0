#ifndef AFFORD_EVALKIT_LOSS_HPP_
#define AFFORD_EVALKIT_LOSS_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "afford/core/types.hpp"

namespace afford::evalkit {

// Predictions are clamped to [kProbEpsilon, 1 - kProbEpsilon] before any log.
inline constexpr double kProbEpsilon = 1e-7;

double clamp_probability(double q);

// H(p, q) = -p log q - (1 - p) log(1 - q), q clamped.
double bce(double p, double q);

struct LossValue {
  double value = 0.0;
  // Set when the mask has no valid pixel; value is then 0.
  bool empty_mask = false;
};

struct LossGradient {
  std::vector<double> values;  // same layout as the prediction tensor
  bool empty_mask = false;
};

// Mean BCE over every channel and pixel.
double loss_unmasked(const AffordanceTensor& target, const AffordanceTensor& prediction);
LossGradient loss_unmasked_grad(const AffordanceTensor& target, const AffordanceTensor& prediction);

// Mean BCE over every channel and the pixels with mask == 1.
LossValue loss_masked(const AffordanceTensor& target, const AffordanceTensor& prediction, const CoverageMask& mask);
LossGradient loss_masked_grad(const AffordanceTensor& target, const AffordanceTensor& prediction,
                              const CoverageMask& mask);

// Raw-buffer forms used by the training loop. Buffers are channel-major with
// `pixels` entries per channel; `mask` may be empty, meaning all valid.
// Accumulation order is fixed: channel, then pixel.
LossValue masked_bce(std::span<const double> target, std::span<const double> prediction,
                     std::span<const std::uint8_t> mask, std::size_t pixels);
LossValue masked_bce_grad(std::span<const double> target, std::span<const double> prediction,
                          std::span<const std::uint8_t> mask, std::size_t pixels, std::span<double> grad);

}  // namespace afford::evalkit

#endif  // AFFORD_EVALKIT_LOSS_HPP_
