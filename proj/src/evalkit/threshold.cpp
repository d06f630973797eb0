#include "afford/evalkit/threshold.hpp"

#include <algorithm>
#include <cmath>

#include "afford/core/errors.hpp"

namespace afford::evalkit {

std::vector<double> default_threshold_grid() {
  std::vector<double> grid(101);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = static_cast<double>(i) / 100.0;
  return grid;
}

ThresholdSweep::ThresholdSweep(std::vector<double> grid) : grid_(std::move(grid)) {
  if (grid_.empty()) throw ArgumentError("threshold grid is empty");
  for (double t : grid_) {
    if (!std::isfinite(t) || t < 0.0 || t > 1.0) throw ArgumentError("threshold grid value outside [0,1]");
  }
  std::sort(grid_.begin(), grid_.end());
  grid_.erase(std::unique(grid_.begin(), grid_.end()), grid_.end());
  for (std::size_t a = 0; a < kNumAffordances; ++a) {
    positives_[a].assign(grid_.size() + 1, 0);
    negatives_[a].assign(grid_.size() + 1, 0);
  }
}

void ThresholdSweep::add(const AffordanceTensor& prediction, const AffordanceTensor& target, const CoverageMask& mask) {
  if (prediction.height() != target.height() || prediction.width() != target.width() ||
      mask.height() != target.height() || mask.width() != target.width()) {
    throw ArgumentError("threshold sweep: prediction, target and mask sizes differ");
  }
  const std::size_t n = target.pixels();
  for (std::size_t a = 0; a < kNumAffordances; ++a) {
    const auto q = prediction.channel(a);
    const auto y = target.channel(a);
    for (std::size_t i = 0; i < n; ++i) {
      if (mask.at(i) == 0) continue;
      // Predicted positive at grid point g iff q >= grid[g], i.e. g < cleared.
      const auto cleared = static_cast<std::size_t>(std::upper_bound(grid_.begin(), grid_.end(), q[i]) - grid_.begin());
      if (y[i] >= 0.5) ++positives_[a][cleared];
      else ++negatives_[a][cleared];
    }
  }
  ++images_;
}

double ThresholdSweep::iou_at(std::size_t a, std::size_t g) const {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t all_pos = 0;
  for (std::size_t b = 0; b < positives_[a].size(); ++b) {
    all_pos += positives_[a][b];
    if (b > g) {
      tp += positives_[a][b];
      fp += negatives_[a][b];
    }
  }
  return iou(ClassCounts{tp, fp, all_pos - tp, 0});
}

ThresholdSet ThresholdSweep::result() const {
  if (images_ == 0) throw ArgumentError("threshold sweep over an empty list of predictions");
  std::array<double, kNumAffordances> best{};
  for (std::size_t a = 0; a < kNumAffordances; ++a) {
    std::uint64_t all_pos = 0;
    for (auto v : positives_[a]) all_pos += v;
    // Walk the grid from the top so counts accumulate incrementally.
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    double best_iou = -1.0;
    std::size_t best_g = grid_.size() - 1;
    for (std::size_t g = grid_.size(); g-- > 0;) {
      tp += positives_[a][g + 1];
      fp += negatives_[a][g + 1];
      const double v = iou(ClassCounts{tp, fp, all_pos - tp, 0});
      if (v > best_iou) {
        best_iou = v;
        best_g = g;
      }
    }
    best[a] = grid_[best_g];
  }
  return ThresholdSet(best);
}

ThresholdSet threshold_sweep(const std::vector<PredictionPair>& pairs, const std::vector<double>& grid) {
  if (pairs.empty()) throw ArgumentError("threshold sweep over an empty list of predictions");
  ThresholdSweep sweep(grid);
  for (const auto& p : pairs) sweep.add(p.prediction, p.target, p.mask);
  return sweep.result();
}

}  // namespace afford::evalkit
