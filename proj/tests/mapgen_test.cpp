#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "afford/core/errors.hpp"
#include "afford/core/formats.hpp"
#include "afford/mapgen/dataset.hpp"
#include "support/oracles.hpp"

using namespace afford;
using namespace afford::mapgen;

namespace {

// Target channel 0 encodes the row, channel 1 the column, so any crop can be
// traced back to its window.
Sample coordinate_sample(std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  Sample s{testing::random_image(rng, h, w), AffordanceTensor(h, w), testing::random_mask(rng, h, w), "coords"};
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t x = 0; x < w; ++x) {
      s.target.at(0, r, x) = static_cast<double>(r) / static_cast<double>(h);
      s.target.at(1, r, x) = static_cast<double>(x) / static_cast<double>(w);
      s.target.at(2, r, x) = static_cast<double>(s.mask.at(r, x));
    }
  }
  return s;
}

}  // namespace

TEST_CASE("zero crops gives an empty list") {
  AugmentSpec spec;
  spec.crops_per_image = 0;
  CHECK(crop_augment(coordinate_sample(16, 16, 1), spec).empty());
}

TEST_CASE("identity jitter on a full-frame crop returns the input image") {
  const auto s = coordinate_sample(24, 24, 2);
  AugmentSpec spec;
  spec.crops_per_image = 3;
  spec.crop_fraction_range = {1.0, 1.0};
  spec.gain_range = {1.0, 1.0};
  spec.contrast_range = {1.0, 1.0};
  for (const auto& c : crop_augment(s, spec)) {
    CHECK(c.image == s.image);
    CHECK(c.target == s.target);
    CHECK(c.mask == s.mask);
  }
}

TEST_CASE("augmentation is deterministic") {
  const auto s = coordinate_sample(64, 64, 3);
  AugmentSpec spec;
  spec.crops_per_image = 3;
  spec.seed = 7;
  const auto a = crop_augment(s, spec);
  const auto b = crop_augment(s, spec);
  REQUIRE(a.size() == 3);
  CHECK(a == b);
  spec.seed = 8;
  CHECK(crop_augment(s, spec) != a);
}

TEST_CASE("geometry lock-step and untouched targets") {
  const std::size_t h = 40, w = 56;
  const auto s = coordinate_sample(h, w, 4);
  AugmentSpec spec;
  spec.crops_per_image = 20;
  spec.crop_fraction_range = {0.3, 1.0};
  spec.seed = 99;
  for (const auto& c : crop_augment(s, spec)) {
    REQUIRE(c.height() == c.width());
    const auto r0 = static_cast<std::size_t>(std::lround(c.target.at(0, 0, 0) * h));
    const auto c0 = static_cast<std::size_t>(std::lround(c.target.at(1, 0, 0) * w));
    for (std::size_t r = 0; r < c.height(); ++r) {
      for (std::size_t x = 0; x < c.width(); ++x) {
        for (std::size_t a = 0; a < kNumAffordances; ++a) CHECK(c.target.at(a, r, x) == s.target.at(a, r0 + r, c0 + x));
        CHECK(c.mask.at(r, x) == s.mask.at(r0 + r, c0 + x));
      }
    }
    CHECK_NOTHROW(c.image.validate());
    CHECK(c.source_id.rfind("coords#crop", 0) == 0);
  }
}

TEST_CASE("jitter follows the gain-then-contrast formula") {
  const auto s = coordinate_sample(16, 16, 5);
  AugmentSpec spec;
  spec.crops_per_image = 1;
  spec.crop_fraction_range = {1.0, 1.0};
  spec.gain_range = {1.1, 1.1};
  spec.contrast_range = {0.5, 0.5};
  const auto out = crop_augment(s, spec).front();
  double mean = 0.0;
  for (double v : s.image.data()) mean += 1.1 * v;
  mean /= static_cast<double>(s.image.data().size());
  for (std::size_t i = 0; i < s.image.data().size(); ++i) {
    const double expected = std::clamp(mean + 0.5 * (1.1 * s.image.data()[i] - mean), 0.0, 1.0);
    CHECK(out.image.data()[i] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("strong jitter stays in range") {
  const auto s = coordinate_sample(32, 32, 6);
  AugmentSpec spec;
  spec.crops_per_image = 10;
  spec.gain_range = {0.2, 3.0};
  spec.contrast_range = {0.1, 4.0};
  for (const auto& c : crop_augment(s, spec)) CHECK_NOTHROW(c.image.validate());
}

TEST_CASE("crop size checks") {
  AugmentSpec spec;
  spec.crops_per_image = 1;
  spec.crop_fraction_range = {0.4, 0.5};
  CHECK_THROWS_AS(crop_augment(coordinate_sample(16, 16, 7), spec), ArgumentError);
  spec.crop_fraction_range = {0.5, 0.5};
  CHECK(crop_augment(coordinate_sample(16, 16, 7), spec).front().height() == 8);
  spec.crop_fraction_range = {0.9, 0.5};
  CHECK_THROWS_AS(spec.validate(), ArgumentError);
  spec.crop_fraction_range = {0.5, 1.0};
  spec.gain_range = {0.0, 1.0};
  CHECK_THROWS_AS(spec.validate(), ArgumentError);
}

TEST_CASE("augment spec JSON round trip") {
  AugmentSpec spec;
  spec.crops_per_image = 5;
  spec.crop_fraction_range = {0.6, 0.9};
  spec.gain_range = {0.7, 1.3};
  spec.contrast_range = {0.9, 1.1};
  spec.seed = 12345678901234ULL;
  const AugmentSpec back = nlohmann::json(spec).get<AugmentSpec>();
  CHECK(back.crops_per_image == spec.crops_per_image);
  CHECK(back.crop_fraction_range == spec.crop_fraction_range);
  CHECK(back.gain_range == spec.gain_range);
  CHECK(back.contrast_range == spec.contrast_range);
  CHECK(back.seed == spec.seed);
}

TEST_CASE("augment_dataset gives each sample its own stream") {
  std::vector<Sample> set = {coordinate_sample(16, 16, 8), coordinate_sample(16, 16, 8)};
  AugmentSpec spec;
  spec.crops_per_image = 2;
  const auto out = augment_dataset(set, spec);
  REQUIRE(out.size() == 4);
  CHECK(out[0].image != out[2].image);
  CHECK(augment_dataset(set, spec) == out);
}

TEST_CASE("mix_datasets") {
  auto make = [](const std::string& id) {
    return Sample{RgbRaster(1, 1), AffordanceTensor(1, 1), CoverageMask(1, 1, 1), id};
  };
  SUBCASE("singleton") {
    const auto out = mix_datasets({}, {make("x")}, 3);
    REQUIRE(out.size() == 1);
    CHECK(out[0].source_id == "x");
  }
  SUBCASE("permutation and determinism") {
    std::vector<Sample> a = {make("a0"), make("a1"), make("a2")};
    std::vector<Sample> b = {make("b0"), make("b1"), make("b2"), make("b3"), make("b4")};
    const auto out = mix_datasets(a, b, 17);
    REQUIRE(out.size() == 8);
    std::vector<std::string> ids;
    for (const auto& s : out) ids.push_back(s.source_id);
    std::sort(ids.begin(), ids.end());
    CHECK(ids == std::vector<std::string>{"a0", "a1", "a2", "b0", "b1", "b2", "b3", "b4"});
    CHECK(mix_datasets(a, b, 17) == out);
  }
  SUBCASE("roughly uniform over positions") {
    std::array<int, 4> first{};
    for (std::uint64_t seed = 0; seed < 4000; ++seed) {
      const auto order = shuffled_indices(4, seed);
      ++first[order[0]];
    }
    for (int c : first) CHECK(std::abs(c - 1000) < 150);
  }
}

TEST_CASE("manifest save and load") {
  const auto dir = testing::scratch_dir("mapgen-manifest");
  Rng rng(21);
  std::vector<ManifestEntry> entries;
  std::vector<Sample> saved;
  for (int i = 0; i < 3; ++i) {
    Sample s{RgbRaster(8, 8), testing::random_soft_target(rng, 8, 8), testing::random_mask(rng, 8, 8),
             "s" + std::to_string(i)};
    for (auto& v : s.image.data()) v = static_cast<double>(rng.below(256)) / 255.0;
    entries.push_back(save_sample(s, dir, "item" + std::to_string(i)));
    saved.push_back(s);
  }
  write_file_atomic(dir / "manifest.json", encode_manifest(entries));
  const auto manifest = read_manifest(dir / "manifest.json");
  REQUIRE(manifest.size() == 3);
  CHECK(manifest.entries[1].image == "item1.png");
  CHECK(load_samples(manifest) == saved);

  write_file_atomic(dir / "bad.json", std::string("{\"image\": 1}"));
  CHECK_THROWS_AS(read_manifest(dir / "bad.json"), FormatError);
  write_file_atomic(dir / "bad2.json", std::string("[{\"image\": \"x.png\"}]"));
  CHECK_THROWS_AS(read_manifest(dir / "bad2.json"), FormatError);
}
