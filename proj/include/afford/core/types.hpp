#ifndef AFFORD_CORE_TYPES_HPP_
#define AFFORD_CORE_TYPES_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "afford/core/vocabulary.hpp"

namespace afford {

// 3-channel image, planar (channel, then row-major), values in [0,1].
class RgbRaster {
 public:
  static constexpr std::size_t kChannels = 3;

  RgbRaster() = default;
  RgbRaster(std::size_t height, std::size_t width);
  RgbRaster(std::size_t height, std::size_t width, std::vector<double> data);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t pixels() const { return height_ * width_; }

  double& at(std::size_t c, std::size_t r, std::size_t x) { return data_[(c * height_ + r) * width_ + x]; }
  double at(std::size_t c, std::size_t r, std::size_t x) const { return data_[(c * height_ + r) * width_ + x]; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  void validate() const;
  bool operator==(const RgbRaster&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

// Per-pixel part label index; 0 means "unlabeled".
class PartLabelMap {
 public:
  using Legend = std::map<std::uint16_t, std::string>;

  PartLabelMap() = default;
  PartLabelMap(std::size_t height, std::size_t width);
  PartLabelMap(std::size_t height, std::size_t width, std::vector<std::uint16_t> indices, Legend legend);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t pixels() const { return height_ * width_; }

  std::uint16_t& at(std::size_t r, std::size_t x) { return indices_[r * width_ + x]; }
  std::uint16_t at(std::size_t r, std::size_t x) const { return indices_[r * width_ + x]; }

  std::span<const std::uint16_t> indices() const { return indices_; }
  std::span<std::uint16_t> indices() { return indices_; }
  const Legend& legend() const { return legend_; }
  Legend& legend() { return legend_; }

  void validate() const;
  bool operator==(const PartLabelMap&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint16_t> indices_;
  Legend legend_;
};

// A x H x W stack of per-affordance maps, channel-major. Used for ground
// truth (values in {0, 0.5, 1}) and predictions (values in [0,1]).
class AffordanceTensor {
 public:
  AffordanceTensor() = default;
  AffordanceTensor(std::size_t height, std::size_t width, double fill = 0.0);
  AffordanceTensor(std::size_t height, std::size_t width, std::vector<double> values);

  std::size_t channels() const { return kNumAffordances; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t pixels() const { return height_ * width_; }
  std::size_t size() const { return values_.size(); }

  double& at(std::size_t a, std::size_t r, std::size_t x) { return values_[(a * height_ + r) * width_ + x]; }
  double at(std::size_t a, std::size_t r, std::size_t x) const { return values_[(a * height_ + r) * width_ + x]; }
  // Flat pixel index i = r * width + x.
  double& at(std::size_t a, std::size_t i) { return values_[a * pixels() + i]; }
  double at(std::size_t a, std::size_t i) const { return values_[a * pixels() + i]; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::span<const double> channel(std::size_t a) const { return std::span<const double>(values_).subspan(a * pixels(), pixels()); }
  std::span<double> channel(std::size_t a) { return std::span<double>(values_).subspan(a * pixels(), pixels()); }

  void validate() const;
  bool operator==(const AffordanceTensor&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> values_;
};

class CoverageMask {
 public:
  CoverageMask() = default;
  CoverageMask(std::size_t height, std::size_t width, std::uint8_t fill = 0);
  CoverageMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> valid);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t pixels() const { return height_ * width_; }

  std::uint8_t& at(std::size_t r, std::size_t x) { return valid_[r * width_ + x]; }
  std::uint8_t at(std::size_t r, std::size_t x) const { return valid_[r * width_ + x]; }
  std::uint8_t& at(std::size_t i) { return valid_[i]; }
  std::uint8_t at(std::size_t i) const { return valid_[i]; }

  std::span<const std::uint8_t> valid() const { return valid_; }
  std::span<std::uint8_t> valid() { return valid_; }
  std::size_t count() const;

  void validate() const;
  bool operator==(const CoverageMask&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> valid_;
};

}  // namespace afford

#endif  // AFFORD_CORE_TYPES_HPP_
