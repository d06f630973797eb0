#include "afford/mapgen/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "afford/core/errors.hpp"
#include "afford/core/formats.hpp"
#include "afford/core/rng.hpp"

namespace afford::mapgen {

namespace {

void check_range(const std::pair<double, double>& r, const char* name, bool positive) {
  if (!std::isfinite(r.first) || !std::isfinite(r.second) || r.first > r.second) {
    throw ArgumentError(std::string(name) + ": invalid interval [" + std::to_string(r.first) + ", " +
                        std::to_string(r.second) + "]");
  }
  if (positive && r.first <= 0.0) throw ArgumentError(std::string(name) + ": interval must be positive");
}

RgbRaster crop_image(const RgbRaster& src, std::size_t r0, std::size_t c0, std::size_t side) {
  RgbRaster out(side, side);
  for (std::size_t c = 0; c < RgbRaster::kChannels; ++c)
    for (std::size_t r = 0; r < side; ++r)
      for (std::size_t x = 0; x < side; ++x) out.at(c, r, x) = src.at(c, r0 + r, c0 + x);
  return out;
}

AffordanceTensor crop_tensor(const AffordanceTensor& src, std::size_t r0, std::size_t c0, std::size_t side) {
  AffordanceTensor out(side, side);
  for (std::size_t a = 0; a < kNumAffordances; ++a)
    for (std::size_t r = 0; r < side; ++r)
      for (std::size_t x = 0; x < side; ++x) out.at(a, r, x) = src.at(a, r0 + r, c0 + x);
  return out;
}

CoverageMask crop_mask(const CoverageMask& src, std::size_t r0, std::size_t c0, std::size_t side) {
  CoverageMask out(side, side);
  for (std::size_t r = 0; r < side; ++r)
    for (std::size_t x = 0; x < side; ++x) out.at(r, x) = src.at(r0 + r, c0 + x);
  return out;
}

// v' = clamp(c * g_ch * v + (1 - c) * m), m = mean of the gained patch.
void jitter(RgbRaster& image, const std::array<double, 3>& gain, double contrast) {
  const std::size_t n = image.pixels();
  auto data = image.data();
  double sum = 0.0;
  for (std::size_t ch = 0; ch < 3; ++ch)
    for (std::size_t i = 0; i < n; ++i) sum += gain[ch] * data[ch * n + i];
  const double mean = sum / static_cast<double>(3 * n);
  for (std::size_t ch = 0; ch < 3; ++ch) {
    for (std::size_t i = 0; i < n; ++i) {
      double& v = data[ch * n + i];
      v = std::clamp(contrast * (gain[ch] * v) + (1.0 - contrast) * mean, 0.0, 1.0);
    }
  }
}

std::string relative_to(const std::filesystem::path& p, const std::filesystem::path& base) {
  return p.lexically_relative(base).generic_string();
}

}  // namespace

void Sample::validate() const {
  if (target.height() != image.height() || target.width() != image.width() || mask.height() != image.height() ||
      mask.width() != image.width()) {
    throw ValidationError("sample '" + source_id + "': image, target and mask sizes differ");
  }
}

void AugmentSpec::validate() const {
  check_range(crop_fraction_range, "crop_fraction_range", true);
  if (crop_fraction_range.second > 1.0) throw ArgumentError("crop_fraction_range: upper bound exceeds 1");
  check_range(gain_range, "gain_range", true);
  check_range(contrast_range, "contrast_range", true);
}

void to_json(nlohmann::json& j, const AugmentSpec& spec) {
  j = nlohmann::json{{"crops_per_image", spec.crops_per_image},
                     {"crop_fraction_range", {spec.crop_fraction_range.first, spec.crop_fraction_range.second}},
                     {"gain_range", {spec.gain_range.first, spec.gain_range.second}},
                     {"contrast_range", {spec.contrast_range.first, spec.contrast_range.second}},
                     {"seed", spec.seed}};
}

void from_json(const nlohmann::json& j, AugmentSpec& spec) {
  auto pair = [](const nlohmann::json& v) { return std::pair<double, double>{v.at(0).get<double>(), v.at(1).get<double>()}; };
  AugmentSpec out;
  if (j.contains("crops_per_image")) out.crops_per_image = j.at("crops_per_image").get<std::size_t>();
  if (j.contains("crop_fraction_range")) out.crop_fraction_range = pair(j.at("crop_fraction_range"));
  if (j.contains("gain_range")) out.gain_range = pair(j.at("gain_range"));
  if (j.contains("contrast_range")) out.contrast_range = pair(j.at("contrast_range"));
  if (j.contains("seed")) out.seed = j.at("seed").get<std::uint64_t>();
  out.validate();
  spec = out;
}

std::vector<Sample> crop_augment(const Sample& sample, const AugmentSpec& spec) {
  spec.validate();
  sample.validate();
  std::vector<Sample> out;
  if (spec.crops_per_image == 0) return out;

  const std::size_t h = sample.height();
  const std::size_t w = sample.width();
  const std::size_t min_side = std::min(h, w);
  const auto side_for = [&](double fraction) {
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(min_side)));
  };
  if (side_for(spec.crop_fraction_range.first) < kMinCropSide) {
    throw ArgumentError("crop of fraction " + std::to_string(spec.crop_fraction_range.first) + " of " +
                        std::to_string(min_side) + " px is smaller than " + std::to_string(kMinCropSide) + "x" +
                        std::to_string(kMinCropSide));
  }

  Rng rng(spec.seed);
  out.reserve(spec.crops_per_image);
  for (std::size_t k = 0; k < spec.crops_per_image; ++k) {
    const double fraction = rng.uniform(spec.crop_fraction_range.first, spec.crop_fraction_range.second);
    const std::size_t side = std::clamp(side_for(fraction), kMinCropSide, min_side);
    const std::size_t r0 = rng.below(h - side + 1);
    const std::size_t c0 = rng.below(w - side + 1);
    std::array<double, 3> gain{};
    for (double& g : gain) g = rng.uniform(spec.gain_range.first, spec.gain_range.second);
    const double contrast = rng.uniform(spec.contrast_range.first, spec.contrast_range.second);

    Sample s{crop_image(sample.image, r0, c0, side), crop_tensor(sample.target, r0, c0, side),
             crop_mask(sample.mask, r0, c0, side), sample.source_id + "#crop" + std::to_string(k)};
    jitter(s.image, gain, contrast);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sample> augment_dataset(const std::vector<Sample>& samples, const AugmentSpec& spec) {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    AugmentSpec per_sample = spec;
    per_sample.seed = splitmix64(spec.seed ^ splitmix64(i));
    auto crops = crop_augment(samples[i], per_sample);
    std::move(crops.begin(), crops.end(), std::back_inserter(out));
  }
  return out;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

std::vector<Sample> mix_datasets(std::vector<Sample> a, std::vector<Sample> b, std::uint64_t seed) {
  std::move(b.begin(), b.end(), std::back_inserter(a));
  const auto order = shuffled_indices(a.size(), seed);
  std::vector<Sample> out;
  out.reserve(a.size());
  for (std::size_t i : order) out.push_back(std::move(a[i]));
  return out;
}

Manifest read_manifest(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("manifest '" + path.string() + "': " + e.what(), e.byte);
  }
  if (!j.is_array()) throw FormatError("manifest '" + path.string() + "' must be a JSON array", 0);
  Manifest m;
  m.base_dir = path.parent_path();
  for (const auto& item : j) {
    try {
      m.entries.push_back(ManifestEntry{item.at("image").get<std::string>(), item.at("target").get<std::string>(),
                                        item.at("mask").get<std::string>(), item.value("source_id", std::string{})});
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("manifest '" + path.string() + "' entry " + std::to_string(m.entries.size()) + ": " + e.what(), 0);
    }
  }
  return m;
}

std::string encode_manifest(const std::vector<ManifestEntry>& entries) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& e : entries) {
    j.push_back({{"image", e.image}, {"target", e.target}, {"mask", e.mask}, {"source_id", e.source_id}});
  }
  return j.dump(2) + "\n";
}

Sample load_sample(const Manifest& manifest, std::size_t index) {
  const auto& e = manifest.entries.at(index);
  Sample s{load_png(manifest.base_dir / e.image), load_tensor(manifest.base_dir / e.target),
           load_mask(manifest.base_dir / e.mask), e.source_id};
  s.validate();
  return s;
}

std::vector<Sample> load_samples(const Manifest& manifest) {
  std::vector<Sample> out;
  out.reserve(manifest.size());
  for (std::size_t i = 0; i < manifest.size(); ++i) out.push_back(load_sample(manifest, i));
  return out;
}

ManifestEntry save_sample(const Sample& sample, const std::filesystem::path& dir, const std::string& stem) {
  sample.validate();
  const auto image = dir / (stem + ".png");
  const auto target = dir / (stem + ".afmt");
  const auto mask = dir / (stem + ".afmk");
  write_file_atomic(image, encode_png(sample.image));
  write_file_atomic(target, encode_tensor(sample.target));
  write_file_atomic(mask, encode_mask(sample.mask));
  return ManifestEntry{relative_to(image, dir), relative_to(target, dir), relative_to(mask, dir), sample.source_id};
}

}  // namespace afford::mapgen
