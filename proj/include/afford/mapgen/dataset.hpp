#ifndef AFFORD_MAPGEN_DATASET_HPP_
#define AFFORD_MAPGEN_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "afford/core/types.hpp"

namespace afford::mapgen {

struct Sample {
  RgbRaster image;
  AffordanceTensor target;
  CoverageMask mask;
  std::string source_id;

  std::size_t height() const { return image.height(); }
  std::size_t width() const { return image.width(); }
  // Throws ValidationError if the three rasters disagree in size.
  void validate() const;
  bool operator==(const Sample&) const = default;
};

struct AugmentSpec {
  std::size_t crops_per_image = 4;
  std::pair<double, double> crop_fraction_range{0.5, 1.0};
  std::pair<double, double> gain_range{0.8, 1.2};
  std::pair<double, double> contrast_range{0.8, 1.2};
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const AugmentSpec& spec);
void from_json(const nlohmann::json& j, AugmentSpec& spec);

inline constexpr std::size_t kMinCropSide = 8;

// Square crops of image, target and mask at one shared window; the image
// alone is then jittered by per-channel gain and contrast about the patch
// mean.
std::vector<Sample> crop_augment(const Sample& sample, const AugmentSpec& spec);

// crop_augment over a list; sample i uses seed derived from (spec.seed, i).
std::vector<Sample> augment_dataset(const std::vector<Sample>& samples, const AugmentSpec& spec);

// Seeded uniform shuffle of a ++ b.
std::vector<Sample> mix_datasets(std::vector<Sample> a, std::vector<Sample> b, std::uint64_t seed);

// Seeded Fisher-Yates permutation of [0, n).
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

// One manifest record. Paths are stored relative to the manifest file.
struct ManifestEntry {
  std::string image;
  std::string target;
  std::string mask;
  std::string source_id;
  bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
  std::filesystem::path base_dir;
  std::vector<ManifestEntry> entries;

  std::size_t size() const { return entries.size(); }
};

Manifest read_manifest(const std::filesystem::path& path);
std::string encode_manifest(const std::vector<ManifestEntry>& entries);

Sample load_sample(const Manifest& manifest, std::size_t index);
std::vector<Sample> load_samples(const Manifest& manifest);

// Writes <stem>.png, <stem>.afmt, <stem>.afmk into `dir` atomically and
// returns the record with paths relative to `dir`.
ManifestEntry save_sample(const Sample& sample, const std::filesystem::path& dir, const std::string& stem);

}  // namespace afford::mapgen

#endif  // AFFORD_MAPGEN_DATASET_HPP_
