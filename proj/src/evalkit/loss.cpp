#include "afford/evalkit/loss.hpp"

#include <algorithm>
#include <cmath>

#include "afford/core/errors.hpp"

namespace afford::evalkit {

namespace {

void check_shapes(const AffordanceTensor& target, const AffordanceTensor& prediction) {
  if (target.height() != prediction.height() || target.width() != prediction.width()) {
    throw ArgumentError("target is " + std::to_string(target.height()) + "x" + std::to_string(target.width()) +
                        ", prediction is " + std::to_string(prediction.height()) + "x" +
                        std::to_string(prediction.width()));
  }
}

void check_mask(const AffordanceTensor& target, const CoverageMask& mask) {
  if (mask.height() != target.height() || mask.width() != target.width()) {
    throw ArgumentError("mask is " + std::to_string(mask.height()) + "x" + std::to_string(mask.width()) +
                        ", tensors are " + std::to_string(target.height()) + "x" + std::to_string(target.width()));
  }
}

void check_buffers(std::span<const double> target, std::span<const double> prediction,
                   std::span<const std::uint8_t> mask, std::size_t pixels) {
  if (target.size() != prediction.size() || target.size() != kNumAffordances * pixels ||
      (!mask.empty() && mask.size() != pixels)) {
    throw ArgumentError("loss buffers disagree in size");
  }
}

std::size_t valid_count(std::span<const std::uint8_t> mask, std::size_t pixels) {
  if (mask.empty()) return pixels;
  std::size_t n = 0;
  for (auto m : mask) n += (m != 0);
  return n;
}

}  // namespace

double clamp_probability(double q) { return std::clamp(q, kProbEpsilon, 1.0 - kProbEpsilon); }

double bce(double p, double q) {
  q = clamp_probability(q);
  return -p * std::log(q) - (1.0 - p) * std::log(1.0 - q);
}

LossValue masked_bce(std::span<const double> target, std::span<const double> prediction,
                     std::span<const std::uint8_t> mask, std::size_t pixels) {
  check_buffers(target, prediction, mask, pixels);
  const std::size_t valid = valid_count(mask, pixels);
  if (valid == 0) return {0.0, true};
  double sum = 0.0;
  for (std::size_t a = 0; a < kNumAffordances; ++a) {
    const std::size_t base = a * pixels;
    for (std::size_t i = 0; i < pixels; ++i) {
      if (!mask.empty() && mask[i] == 0) continue;
      sum += bce(target[base + i], prediction[base + i]);
    }
  }
  return {sum / (static_cast<double>(kNumAffordances) * static_cast<double>(valid)), false};
}

LossValue masked_bce_grad(std::span<const double> target, std::span<const double> prediction,
                          std::span<const std::uint8_t> mask, std::size_t pixels, std::span<double> grad) {
  check_buffers(target, prediction, mask, pixels);
  if (grad.size() != prediction.size()) throw ArgumentError("gradient buffer has wrong size");
  std::fill(grad.begin(), grad.end(), 0.0);
  const std::size_t valid = valid_count(mask, pixels);
  if (valid == 0) return {0.0, true};
  const double denom = static_cast<double>(kNumAffordances) * static_cast<double>(valid);
  double sum = 0.0;
  for (std::size_t a = 0; a < kNumAffordances; ++a) {
    const std::size_t base = a * pixels;
    for (std::size_t i = 0; i < pixels; ++i) {
      if (!mask.empty() && mask[i] == 0) continue;
      const double y = target[base + i];
      const double q = clamp_probability(prediction[base + i]);
      sum += -y * std::log(q) - (1.0 - y) * std::log(1.0 - q);
      grad[base + i] = (q - y) / (q * (1.0 - q)) / denom;
    }
  }
  return {sum / denom, false};
}

double loss_unmasked(const AffordanceTensor& target, const AffordanceTensor& prediction) {
  check_shapes(target, prediction);
  return masked_bce(target.values(), prediction.values(), {}, target.pixels()).value;
}

LossGradient loss_unmasked_grad(const AffordanceTensor& target, const AffordanceTensor& prediction) {
  check_shapes(target, prediction);
  LossGradient g;
  g.values.resize(prediction.size());
  g.empty_mask = masked_bce_grad(target.values(), prediction.values(), {}, target.pixels(), g.values).empty_mask;
  return g;
}

LossValue loss_masked(const AffordanceTensor& target, const AffordanceTensor& prediction, const CoverageMask& mask) {
  check_shapes(target, prediction);
  check_mask(target, mask);
  return masked_bce(target.values(), prediction.values(), mask.valid(), target.pixels());
}

LossGradient loss_masked_grad(const AffordanceTensor& target, const AffordanceTensor& prediction,
                              const CoverageMask& mask) {
  check_shapes(target, prediction);
  check_mask(target, mask);
  LossGradient g;
  g.values.resize(prediction.size());
  g.empty_mask =
      masked_bce_grad(target.values(), prediction.values(), mask.valid(), target.pixels(), g.values).empty_mask;
  return g;
}

}  // namespace afford::evalkit
