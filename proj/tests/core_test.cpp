#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "afford/core/errors.hpp"
#include "afford/core/formats.hpp"
#include "afford/core/rng.hpp"
#include "afford/core/types.hpp"
#include "afford/core/vocabulary.hpp"
#include "support/oracles.hpp"

using namespace afford;

TEST_CASE("vocabulary has 15 unique names in fixed order") {
  CHECK(kAffordanceNames.size() == 15);
  std::set<std::string_view> unique(kAffordanceNames.begin(), kAffordanceNames.end());
  CHECK(unique.size() == 15);
  CHECK(kAffordanceNames.front() == "obstruct");
  CHECK(kAffordanceNames[9] == "tip-push");
  CHECK(kAffordanceNames[11] == "observe");
  CHECK(kAffordanceNames.back() == "walk");
  CHECK(index_of(Affordance::kWalk) == 14);
  CHECK(affordance_name(index_of(Affordance::kHookPull)) == "hook-pull");
}

TEST_CASE("aliases resolve on input") {
  CHECK(find_affordance("observe") == 11u);
  CHECK(find_affordance("read/watch") == 11u);
  CHECK(find_affordance("tip/push") == 9u);
  CHECK(find_affordance("pinch_pull") == 1u);
  CHECK_FALSE(find_affordance("Obstruct").has_value());
  CHECK_FALSE(find_affordance("fly").has_value());
}

TEST_CASE("type invariants") {
  SUBCASE("raster values must lie in [0,1]") {
    RgbRaster img(2, 2);
    CHECK_NOTHROW(img.validate());
    img.at(1, 0, 1) = 1.01;
    CHECK_THROWS_AS(img.validate(), ValidationError);
    img.at(1, 0, 1) = std::nan("");
    CHECK_THROWS_AS(img.validate(), ValidationError);
  }
  SUBCASE("raster data length") { CHECK_THROWS_AS(RgbRaster(2, 2, std::vector<double>(11)), ValidationError); }
  SUBCASE("tensor rejects out-of-range values") {
    AffordanceTensor t(2, 2);
    t.at(3, 1, 1) = -0.1;
    CHECK_THROWS_AS(t.validate(), ValidationError);
  }
  SUBCASE("mask values are 0 or 1") {
    CoverageMask m(2, 2, 1);
    CHECK(m.count() == 4);
    m.at(0, 0) = 2;
    CHECK_THROWS_AS(m.validate(), ValidationError);
  }
  SUBCASE("label map legend rules") {
    PartLabelMap ok(1, 2, {1, 0}, {{1, "cabinet/drawer/knob"}});
    CHECK_NOTHROW(ok.validate());
    PartLabelMap missing(1, 2, {1, 2}, {{1, "pot"}});
    CHECK_THROWS_AS(missing.validate(), ValidationError);
    PartLabelMap upper(1, 1, {1}, {{1, "Pot"}});
    CHECK_THROWS_AS(upper.validate(), ValidationError);
    PartLabelMap empty_segment(1, 1, {1}, {{1, "table//top"}});
    CHECK_THROWS_AS(empty_segment.validate(), ValidationError);
    PartLabelMap zero(1, 1, {0}, {{0, "pot"}});
    CHECK_THROWS_AS(zero.validate(), ValidationError);
  }
}

TEST_CASE("AFMT layout") {
  AffordanceTensor zeros(2, 2);
  std::ostringstream out;
  CHECK(write_tensor(zeros, out) == 257);
  const std::string bytes = out.str();
  REQUIRE(bytes.size() == 257);
  CHECK(bytes.substr(0, 4) == "AFMT");
  CHECK(bytes[4] == 1);
  CHECK(static_cast<unsigned char>(bytes[5]) == 15);
  CHECK(static_cast<unsigned char>(bytes[9]) == 2);
  CHECK(static_cast<unsigned char>(bytes[13]) == 2);

  AffordanceTensor one(1, 1);
  one.at(0, 0) = 1.0;
  const auto enc = encode_tensor(one);
  // 1.0f little-endian is 00 00 80 3f
  CHECK(enc[17] == 0x00);
  CHECK(enc[19] == 0x80);
  CHECK(enc[20] == 0x3f);
}

TEST_CASE("AFMT round trip is exact for f32-representable values") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t h = 1 + rng.below(6), w = 1 + rng.below(6);
    AffordanceTensor t(h, w);
    for (auto& v : t.values()) v = static_cast<double>(static_cast<float>(rng.uniform()));
    std::stringstream ss;
    write_tensor(t, ss);
    CHECK(read_tensor(ss) == t);
  }
}

TEST_CASE("AFMT errors") {
  AffordanceTensor t(2, 2, 0.25);
  SUBCASE("invalid tensor is not written") {
    t.at(0, 0) = 1.5;
    std::ostringstream out;
    CHECK_THROWS_AS(write_tensor(t, out), ValidationError);
    CHECK(out.str().empty());
  }
  SUBCASE("bad magic at offset 0") {
    auto bytes = encode_tensor(t);
    std::memcpy(bytes.data(), "XXXX", 4);
    try {
      decode_tensor(bytes);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 0);
    }
  }
  SUBCASE("truncated payload reports expected and actual length") {
    auto bytes = encode_tensor(t);
    bytes.pop_back();
    try {
      decode_tensor(bytes);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("240") != std::string::npos);
      CHECK(msg.find("239") != std::string::npos);
    }
  }
  SUBCASE("non-finite value") {
    auto bytes = encode_tensor(t);
    const float nan = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(bytes.data() + 17 + 8, &nan, 4);
    try {
      decode_tensor(bytes);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 25);
    }
  }
  SUBCASE("wrong version and channel count") {
    auto bytes = encode_tensor(t);
    bytes[4] = 2;
    CHECK_THROWS_AS(decode_tensor(bytes), FormatError);
    bytes = encode_tensor(t);
    bytes[5] = 14;
    CHECK_THROWS_AS(decode_tensor(bytes), FormatError);
  }
  SUBCASE("trailing bytes") {
    auto bytes = encode_tensor(t);
    bytes.push_back(0);
    CHECK_THROWS_AS(decode_tensor(bytes), FormatError);
  }
}

TEST_CASE("AFMK encoding") {
  CoverageMask all(2, 2, 1);
  const auto bytes = encode_mask(all);
  REQUIRE(bytes.size() == 17);
  CHECK(std::vector<std::uint8_t>(bytes.end() - 4, bytes.end()) == std::vector<std::uint8_t>{1, 1, 1, 1});

  auto bad = bytes;
  bad[14] = 2;
  try {
    decode_mask(bad);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 14);
  }

  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const auto m = testing::random_mask(rng, 1 + rng.below(7), 1 + rng.below(7));
    std::stringstream ss;
    write_mask(m, ss);
    CHECK(read_mask(ss) == m);
  }
}

TEST_CASE("PLBL and legend round trip") {
  Rng rng(9);
  PartLabelMap::Legend legend{{1, "table/top"}, {2, "cabinet/drawer/knob"}, {300, "pot"}};
  const std::vector<std::uint16_t> choices{0, 1, 2, 300};
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t h = 1 + rng.below(5), w = 1 + rng.below(5);
    std::vector<std::uint16_t> idx(h * w);
    for (auto& v : idx) v = choices[rng.below(choices.size())];
    PartLabelMap map(h, w, idx, legend);
    const auto back = decode_labels(encode_labels(map), decode_legend(encode_legend(legend)));
    CHECK(back == map);
  }
  PartLabelMap map(1, 1, {2}, legend);
  CHECK_THROWS_AS(decode_labels(encode_labels(map), {{1, "pot"}}), FormatError);
  CHECK_THROWS_AS(decode_legend("{\"0\": \"pot\"}"), FormatError);
  CHECK_THROWS_AS(decode_legend("[1]"), FormatError);
}

TEST_CASE("PNG round trip of 8-bit values") {
  Rng rng(3);
  RgbRaster img(5, 7);
  for (auto& v : img.data()) v = static_cast<double>(rng.below(256)) / 255.0;
  CHECK(decode_png(encode_png(img)) == img);
  CHECK_THROWS_AS(decode_png(Bytes{1, 2, 3}), FormatError);
}

TEST_CASE("atomic file writes") {
  const auto dir = testing::scratch_dir("core-atomic");
  const auto path = dir / "x.bin";
  write_file_atomic(path, std::string("first"));
  write_file_atomic(path, std::string("second"));
  CHECK(read_text_file(path) == "second");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir)) ++files;
  CHECK(files == 1);
  CHECK_THROWS_AS(read_file(dir / "missing"), IoError);
  CHECK_THROWS_AS(write_file_atomic(dir / "no" / "such" / "dir" / "f", std::string("x")), IoError);
}

TEST_CASE("rng streams are reproducible") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    CHECK(x == b.next());
    (void)c;
  }
  Rng u(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
    CHECK(u.below(7) < 7);
  }
}
