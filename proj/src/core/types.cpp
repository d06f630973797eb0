#include "afford/core/types.hpp"

#include <cmath>
#include <numeric>

#include "afford/core/errors.hpp"

namespace afford {

namespace {

void check_size(std::size_t actual, std::size_t expected, const char* what) {
  if (actual != expected) {
    throw ValidationError(std::string(what) + ": expected " + std::to_string(expected) + " values, got " +
                          std::to_string(actual));
  }
}

void check_unit_interval(std::span<const double> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw ValidationError(std::string(what) + ": value " + std::to_string(v) + " at index " + std::to_string(i) +
                            " outside [0,1]");
    }
  }
}

bool valid_label_path(const std::string& path) {
  if (path.empty() || path.front() == '/' || path.back() == '/') return false;
  if (path.find("//") != std::string::npos) return false;
  for (char c : path) {
    if (c >= 'A' && c <= 'Z') return false;
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') return false;
  }
  return true;
}

}  // namespace

RgbRaster::RgbRaster(std::size_t height, std::size_t width)
    : height_(height), width_(width), data_(kChannels * height * width, 0.0) {}

RgbRaster::RgbRaster(std::size_t height, std::size_t width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
  check_size(data_.size(), kChannels * height * width, "RgbRaster");
}

void RgbRaster::validate() const {
  check_size(data_.size(), kChannels * height_ * width_, "RgbRaster");
  check_unit_interval(data_, "RgbRaster");
}

PartLabelMap::PartLabelMap(std::size_t height, std::size_t width)
    : height_(height), width_(width), indices_(height * width, 0) {}

PartLabelMap::PartLabelMap(std::size_t height, std::size_t width, std::vector<std::uint16_t> indices, Legend legend)
    : height_(height), width_(width), indices_(std::move(indices)), legend_(std::move(legend)) {
  check_size(indices_.size(), height * width, "PartLabelMap");
}

void PartLabelMap::validate() const {
  check_size(indices_.size(), height_ * width_, "PartLabelMap");
  for (const auto& [index, path] : legend_) {
    if (index == 0) throw ValidationError("PartLabelMap: legend must not define index 0");
    if (!valid_label_path(path)) throw ValidationError("PartLabelMap: invalid label path '" + path + "'");
  }
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    const auto index = indices_[i];
    if (index != 0 && !legend_.contains(index)) {
      throw ValidationError("PartLabelMap: index " + std::to_string(index) + " at pixel " + std::to_string(i) +
                            " missing from legend");
    }
  }
}

AffordanceTensor::AffordanceTensor(std::size_t height, std::size_t width, double fill)
    : height_(height), width_(width), values_(kNumAffordances * height * width, fill) {}

AffordanceTensor::AffordanceTensor(std::size_t height, std::size_t width, std::vector<double> values)
    : height_(height), width_(width), values_(std::move(values)) {
  check_size(values_.size(), kNumAffordances * height * width, "AffordanceTensor");
}

void AffordanceTensor::validate() const {
  check_size(values_.size(), kNumAffordances * height_ * width_, "AffordanceTensor");
  check_unit_interval(values_, "AffordanceTensor");
}

CoverageMask::CoverageMask(std::size_t height, std::size_t width, std::uint8_t fill)
    : height_(height), width_(width), valid_(height * width, fill) {}

CoverageMask::CoverageMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> valid)
    : height_(height), width_(width), valid_(std::move(valid)) {
  check_size(valid_.size(), height * width, "CoverageMask");
}

std::size_t CoverageMask::count() const {
  return std::accumulate(valid_.begin(), valid_.end(), std::size_t{0},
                         [](std::size_t acc, std::uint8_t v) { return acc + v; });
}

void CoverageMask::validate() const {
  check_size(valid_.size(), height_ * width_, "CoverageMask");
  for (std::size_t i = 0; i < valid_.size(); ++i) {
    if (valid_[i] > 1) {
      throw ValidationError("CoverageMask: value " + std::to_string(valid_[i]) + " at pixel " + std::to_string(i));
    }
  }
}

}  // namespace afford
