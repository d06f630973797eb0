#ifndef AFFORD_EVALKIT_THRESHOLD_HPP_
#define AFFORD_EVALKIT_THRESHOLD_HPP_

#include <array>
#include <cstdint>
#include <vector>

#include "afford/core/types.hpp"
#include "afford/evalkit/metrics.hpp"

namespace afford::evalkit {

// {0.00, 0.01, ..., 1.00}
std::vector<double> default_threshold_grid();

struct PredictionPair {
  const AffordanceTensor& prediction;
  const AffordanceTensor& target;
  const CoverageMask& mask;
};

// Per-affordance IoU-maximizing threshold over a grid. Confusion counts are
// pooled over every added image before the ratio is formed; ties go to the
// larger threshold.
class ThresholdSweep {
 public:
  explicit ThresholdSweep(std::vector<double> grid = default_threshold_grid());

  void add(const AffordanceTensor& prediction, const AffordanceTensor& target, const CoverageMask& mask);

  std::size_t images() const { return images_; }
  const std::vector<double>& grid() const { return grid_; }
  // Pooled IoU of affordance `a` at grid point `g`.
  double iou_at(std::size_t a, std::size_t g) const;
  ThresholdSet result() const;

 private:
  std::vector<double> grid_;
  // histogram[a][b]: pixels whose prediction clears exactly the first b grid
  // thresholds, split by ground truth.
  std::array<std::vector<std::uint64_t>, kNumAffordances> positives_;
  std::array<std::vector<std::uint64_t>, kNumAffordances> negatives_;
  std::size_t images_ = 0;
};

ThresholdSet threshold_sweep(const std::vector<PredictionPair>& pairs,
                             const std::vector<double>& grid = default_threshold_grid());

}  // namespace afford::evalkit

#endif  // AFFORD_EVALKIT_THRESHOLD_HPP_
