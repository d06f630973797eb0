#include "afford/evalkit/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "afford/core/errors.hpp"

namespace afford::evalkit {

namespace {

void check_binary(const AffordanceTensor& t, const char* what) {
  for (double v : t.values()) {
    if (v != 0.0 && v != 1.0) throw ArgumentError(std::string(what) + " is not binary");
  }
}

double ratio(std::uint64_t num, std::uint64_t den) { return static_cast<double>(num) / static_cast<double>(den); }

}  // namespace

ThresholdSet::ThresholdSet(const std::array<double, kNumAffordances>& values) : values_(values) {
  for (std::size_t a = 0; a < kNumAffordances; ++a) {
    if (!std::isfinite(values_[a]) || values_[a] < 0.0 || values_[a] > 1.0) {
      throw ValidationError("threshold for " + std::string(kAffordanceNames[a]) + " outside [0,1]");
    }
  }
}

std::string encode_thresholds(const ThresholdSet& t) { return nlohmann::json(t.values()).dump() + "\n"; }

ThresholdSet decode_thresholds(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("thresholds JSON: ") + e.what(), e.byte);
  }
  if (!j.is_array() || j.size() != kNumAffordances) {
    throw FormatError("thresholds must be a JSON array of " + std::to_string(kNumAffordances) + " numbers", 0);
  }
  std::array<double, kNumAffordances> values{};
  for (std::size_t a = 0; a < kNumAffordances; ++a) {
    if (!j[a].is_number()) throw FormatError("threshold " + std::to_string(a) + " is not a number", 0);
    values[a] = j[a].get<double>();
  }
  return ThresholdSet(values);
}

AffordanceTensor binarize(const AffordanceTensor& prediction, const ThresholdSet& thresholds) {
  AffordanceTensor out(prediction.height(), prediction.width());
  for (std::size_t a = 0; a < kNumAffordances; ++a) {
    const auto src = prediction.channel(a);
    auto dst = out.channel(a);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] >= thresholds[a] ? 1.0 : 0.0;
  }
  return out;
}

AffordanceTensor binarize_ground_truth(const AffordanceTensor& target) { return binarize(target, ThresholdSet(0.5)); }

const char* mode_name(MetricsMode mode) { return mode == MetricsMode::kPaper ? "paper" : "standard"; }

MetricsMode parse_mode(const std::string& name) {
  if (name == "paper") return MetricsMode::kPaper;
  if (name == "standard") return MetricsMode::kStandard;
  throw ArgumentError("unknown metrics mode '" + name + "' (expected paper or standard)");
}

double iou(const ClassCounts& c) {
  const std::uint64_t uni = c.tp + c.fp + c.fn;
  return uni == 0 ? 1.0 : ratio(c.tp, uni);
}

std::optional<double> class_accuracy(const ClassCounts& c, MetricsMode mode) {
  const std::uint64_t positives = c.tp + c.fn;
  if (positives == 0) return std::nullopt;
  // The positives-only denominator makes paper-mode values exceed 1 whenever
  // true negatives outnumber missed positives.
  const std::uint64_t hits = mode == MetricsMode::kPaper ? c.tp + c.tn : c.tp;
  return ratio(hits, positives);
}

MetricsReport report_from_counts(const std::array<ClassCounts, kNumAffordances>& counts, std::uint64_t valid_pixels,
                                 MetricsMode mode) {
  MetricsReport r;
  r.mode = mode;
  r.counts = counts;
  r.valid_pixels = valid_pixels;

  double iou_sum = 0.0;
  double acc_sum = 0.0;
  std::size_t acc_classes = 0;
  std::uint64_t agree = 0;
  std::uint64_t positives = 0;
  std::uint64_t total = 0;
  for (std::size_t a = 0; a < kNumAffordances; ++a) {
    const auto& c = counts[a];
    r.iou[a] = iou(c);
    iou_sum += r.iou[a];
    r.accuracy[a] = class_accuracy(c, mode);
    if (r.accuracy[a]) {
      acc_sum += *r.accuracy[a];
      ++acc_classes;
    }
    agree += c.tp + c.tn;
    positives += c.tp + c.fn;
    total += c.tp + c.fp + c.fn + c.tn;
  }
  r.mean_iou = iou_sum / static_cast<double>(kNumAffordances);
  r.mean_accuracy = acc_classes == 0 ? 0.0 : acc_sum / static_cast<double>(acc_classes);
  const std::uint64_t den = mode == MetricsMode::kPaper ? positives : total;
  r.pixel_accuracy = den == 0 ? 0.0 : ratio(agree, den);
  return r;
}

void MetricsAccumulator::add(const AffordanceTensor& truth_bin, const AffordanceTensor& prediction_bin,
                             const CoverageMask& mask) {
  if (truth_bin.height() != prediction_bin.height() || truth_bin.width() != prediction_bin.width() ||
      mask.height() != truth_bin.height() || mask.width() != truth_bin.width()) {
    throw ArgumentError("metrics: ground truth, prediction and mask sizes differ");
  }
  check_binary(truth_bin, "ground truth");
  check_binary(prediction_bin, "prediction");
  const std::size_t n = truth_bin.pixels();
  for (std::size_t a = 0; a < kNumAffordances; ++a) {
    const auto y = truth_bin.channel(a);
    const auto p = prediction_bin.channel(a);
    auto& c = counts_[a];
    for (std::size_t i = 0; i < n; ++i) {
      if (mask.at(i) == 0) continue;
      const bool truth = y[i] == 1.0;
      const bool pred = p[i] == 1.0;
      if (truth && pred) ++c.tp;
      else if (pred) ++c.fp;
      else if (truth) ++c.fn;
      else ++c.tn;
    }
  }
  valid_pixels_ += mask.count();
}

MetricsReport metrics(const AffordanceTensor& truth_bin, const AffordanceTensor& prediction_bin,
                      const CoverageMask& mask, MetricsMode mode) {
  MetricsAccumulator acc;
  acc.add(truth_bin, prediction_bin, mask);
  return acc.report(mode);
}

nlohmann::ordered_json report_to_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["mode"] = mode_name(report.mode);
  j["valid_pixels"] = report.valid_pixels;
  j["mean_iou"] = report.mean_iou;
  j["mean_accuracy"] = report.mean_accuracy;
  j["pixel_accuracy"] = report.pixel_accuracy;
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t a = 0; a < kNumAffordances; ++a) {
    const auto& c = report.counts[a];
    nlohmann::ordered_json row;
    row["affordance"] = std::string(kAffordanceNames[a]);
    row["iou"] = report.iou[a];
    row["accuracy"] = report.accuracy[a] ? nlohmann::ordered_json(*report.accuracy[a]) : nlohmann::ordered_json();
    row["tp"] = c.tp;
    row["fp"] = c.fp;
    row["fn"] = c.fn;
    row["tn"] = c.tn;
    rows.push_back(std::move(row));
  }
  j["affordances"] = std::move(rows);
  return j;
}

MetricsReport report_from_json(const nlohmann::json& j) {
  try {
    std::array<ClassCounts, kNumAffordances> counts{};
    const auto& rows = j.at("affordances");
    if (!rows.is_array() || rows.size() != kNumAffordances) throw FormatError("report needs 15 affordance rows", 0);
    for (const auto& row : rows) {
      const auto a = find_affordance(row.at("affordance").get<std::string>());
      if (!a) throw FormatError("report names unknown affordance", 0);
      counts[*a] = ClassCounts{row.at("tp").get<std::uint64_t>(), row.at("fp").get<std::uint64_t>(),
                               row.at("fn").get<std::uint64_t>(), row.at("tn").get<std::uint64_t>()};
    }
    return report_from_counts(counts, j.at("valid_pixels").get<std::uint64_t>(),
                              parse_mode(j.at("mode").get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("report JSON: ") + e.what(), 0);
  }
}

std::string format_report_table(const MetricsReport& report) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof line, "%-14s %8s %10s\n", "affordance", "IoU", "accuracy");
  out << line;
  for (std::size_t a = 0; a < kNumAffordances; ++a) {
    const std::string name(kAffordanceNames[a]);
    if (report.accuracy[a]) {
      std::snprintf(line, sizeof line, "%-14s %8.3f %10.3f\n", name.c_str(), report.iou[a], *report.accuracy[a]);
    } else {
      std::snprintf(line, sizeof line, "%-14s %8.3f %10s\n", name.c_str(), report.iou[a], "-");
    }
    out << line;
  }
  std::snprintf(line, sizeof line, "mean IoU %.3f | mean accuracy %.3f | pixel accuracy %.3f | mode %s\n",
                report.mean_iou, report.mean_accuracy, report.pixel_accuracy, mode_name(report.mode));
  out << line;
  return out.str();
}

}  // namespace afford::evalkit
