#ifndef AFFORD_EVALKIT_METRICS_HPP_
#define AFFORD_EVALKIT_METRICS_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "afford/core/types.hpp"

namespace afford::evalkit {

class ThresholdSet {
 public:
  ThresholdSet() { values_.fill(0.5); }
  explicit ThresholdSet(double all) { values_.fill(all); }
  explicit ThresholdSet(const std::array<double, kNumAffordances>& values);

  double operator[](std::size_t a) const { return values_[a]; }
  const std::array<double, kNumAffordances>& values() const { return values_; }
  bool operator==(const ThresholdSet&) const = default;

 private:
  std::array<double, kNumAffordances> values_{};
};

// JSON array of 15 numbers.
std::string encode_thresholds(const ThresholdSet& t);
ThresholdSet decode_thresholds(const std::string& json_text);

// 1 where prediction >= threshold of its channel, else 0.
AffordanceTensor binarize(const AffordanceTensor& prediction, const ThresholdSet& thresholds);
// Ground truth rule: soft values >= 0.5 ("partial") count as present.
AffordanceTensor binarize_ground_truth(const AffordanceTensor& target);

enum class MetricsMode { kStandard, kPaper };

const char* mode_name(MetricsMode mode);
MetricsMode parse_mode(const std::string& name);

struct ClassCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;
  bool operator==(const ClassCounts&) const = default;
};

// Intersection over union; 1 when both prediction and truth are empty.
double iou(const ClassCounts& c);

// Mode-dependent class-wise accuracy; nullopt when its denominator
// (count of ground-truth positives) is zero.
std::optional<double> class_accuracy(const ClassCounts& c, MetricsMode mode);

struct MetricsReport {
  MetricsMode mode = MetricsMode::kStandard;
  std::array<ClassCounts, kNumAffordances> counts{};
  std::array<double, kNumAffordances> iou{};
  std::array<std::optional<double>, kNumAffordances> accuracy{};
  double mean_iou = 0.0;
  // Mean over classes whose accuracy is defined; 0 if none is.
  double mean_accuracy = 0.0;
  double pixel_accuracy = 0.0;
  std::uint64_t valid_pixels = 0;
};

MetricsReport report_from_counts(const std::array<ClassCounts, kNumAffordances>& counts, std::uint64_t valid_pixels,
                                 MetricsMode mode);

// Pools confusion counts over any number of images.
class MetricsAccumulator {
 public:
  // Both tensors must be binary (every value 0 or 1); sums run over mask == 1.
  void add(const AffordanceTensor& truth_bin, const AffordanceTensor& prediction_bin, const CoverageMask& mask);
  MetricsReport report(MetricsMode mode) const { return report_from_counts(counts_, valid_pixels_, mode); }
  const std::array<ClassCounts, kNumAffordances>& counts() const { return counts_; }

 private:
  std::array<ClassCounts, kNumAffordances> counts_{};
  std::uint64_t valid_pixels_ = 0;
};

MetricsReport metrics(const AffordanceTensor& truth_bin, const AffordanceTensor& prediction_bin,
                      const CoverageMask& mask, MetricsMode mode);

nlohmann::ordered_json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);
// Fixed-width per-affordance table for terminals.
std::string format_report_table(const MetricsReport& report);

}  // namespace afford::evalkit

#endif  // AFFORD_EVALKIT_METRICS_HPP_
