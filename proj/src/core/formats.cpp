#include "afford/core/formats.hpp"

#include <png.h>
#include <unistd.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>
#include <sstream>

#include "afford/core/errors.hpp"

namespace afford {

namespace {

static_assert(std::endian::native == std::endian::little, "formats assume a little-endian host");

constexpr std::size_t kMagicSize = 4;

class Writer {
 public:
  void magic(const char (&m)[5]) { bytes_.insert(bytes_.end(), m, m + kMagicSize); }
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) { raw(&v, sizeof v); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void f32(float v) { raw(&v, sizeof v); }
  void reserve(std::size_t n) { bytes_.reserve(n); }
  Bytes take() { return std::move(bytes_); }

 private:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  Bytes bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void magic(const char (&m)[5], const char* format) {
    need(kMagicSize, "magic");
    if (std::memcmp(bytes_.data(), m, kMagicSize) != 0) {
      throw FormatError(std::string("bad magic, expected \"") + m + "\" for " + format + " file", 0);
    }
    pos_ += kMagicSize;
  }
  void version() {
    const std::size_t at = pos_;
    const std::uint8_t v = u8();
    if (v != kFormatVersion) throw FormatError("unsupported version " + std::to_string(v), at);
  }
  std::uint8_t u8() {
    need(1, "u8");
    return bytes_[pos_++];
  }
  std::uint16_t u16() { return scalar<std::uint16_t>(); }
  std::uint32_t u32() { return scalar<std::uint32_t>(); }
  float f32() { return scalar<float>(); }

  // Checks that exactly `n` payload bytes remain.
  void expect_payload(std::size_t n) {
    const std::size_t actual = bytes_.size() - pos_;
    if (actual < n) {
      throw FormatError("truncated payload: expected " + std::to_string(n) + " bytes, got " + std::to_string(actual),
                        bytes_.size());
    }
    if (actual > n) {
      throw FormatError("trailing data: expected " + std::to_string(n) + " payload bytes, got " +
                            std::to_string(actual),
                        pos_ + n);
    }
  }
  std::size_t pos() const { return pos_; }

 private:
  template <typename T>
  T scalar() {
    need(sizeof(T), "header field");
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("truncated ") + what + ": expected " + std::to_string(n) + " bytes, got " +
                            std::to_string(bytes_.size() - pos_),
                        pos_);
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > UINT32_MAX) throw ValidationError(std::string(what) + " does not fit in u32");
  return static_cast<std::uint32_t>(v);
}

std::size_t checked_area(std::uint32_t a, std::uint32_t b, std::uint32_t c, std::size_t elem, std::size_t at) {
  const unsigned __int128 n = static_cast<unsigned __int128>(a) * b * c * elem;
  if (n > (std::size_t{1} << 40)) throw FormatError("implausible dimensions", at);
  return static_cast<std::size_t>(n);
}

std::size_t write_bytes(const Bytes& bytes, std::ostream& out) {
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed to write " + std::to_string(bytes.size()) + " bytes");
  return bytes.size();
}

Bytes slurp(std::istream& in) {
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed to read stream");
  return bytes;
}

}  // namespace

Bytes encode_tensor(const AffordanceTensor& t) {
  t.validate();
  Writer w;
  w.reserve(17 + 4 * t.size());
  w.magic("AFMT");
  w.u8(kFormatVersion);
  w.u32(checked_u32(t.channels(), "channel count"));
  w.u32(checked_u32(t.height(), "height"));
  w.u32(checked_u32(t.width(), "width"));
  for (double v : t.values()) w.f32(static_cast<float>(v));
  return w.take();
}

AffordanceTensor decode_tensor(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.magic("AFMT", "tensor");
  r.version();
  const std::size_t channels_at = r.pos();
  const std::uint32_t a = r.u32();
  const std::uint32_t h = r.u32();
  const std::uint32_t w = r.u32();
  if (a != kNumAffordances) {
    throw FormatError("expected " + std::to_string(kNumAffordances) + " channels, got " + std::to_string(a),
                      channels_at);
  }
  const std::size_t payload = checked_area(a, h, w, 4, channels_at);
  r.expect_payload(payload);
  std::vector<double> values(payload / 4);
  for (auto& v : values) {
    const std::size_t at = r.pos();
    const float f = r.f32();
    if (!std::isfinite(f)) throw FormatError("non-finite value", at);
    if (f < 0.0f || f > 1.0f) throw FormatError("value " + std::to_string(f) + " outside [0,1]", at);
    v = f;
  }
  return AffordanceTensor(h, w, std::move(values));
}

std::size_t write_tensor(const AffordanceTensor& t, std::ostream& out) { return write_bytes(encode_tensor(t), out); }
AffordanceTensor read_tensor(std::istream& in) { return decode_tensor(slurp(in)); }

Bytes encode_mask(const CoverageMask& m) {
  m.validate();
  Writer w;
  w.reserve(13 + m.pixels());
  w.magic("AFMK");
  w.u8(kFormatVersion);
  w.u32(checked_u32(m.height(), "height"));
  w.u32(checked_u32(m.width(), "width"));
  for (std::uint8_t v : m.valid()) w.u8(v);
  return w.take();
}

CoverageMask decode_mask(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.magic("AFMK", "mask");
  r.version();
  const std::size_t dims_at = r.pos();
  const std::uint32_t h = r.u32();
  const std::uint32_t w = r.u32();
  r.expect_payload(checked_area(h, w, 1, 1, dims_at));
  std::vector<std::uint8_t> valid(static_cast<std::size_t>(h) * w);
  for (auto& v : valid) {
    const std::size_t at = r.pos();
    v = r.u8();
    if (v > 1) throw FormatError("mask byte " + std::to_string(v) + " not in {0,1}", at);
  }
  return CoverageMask(h, w, std::move(valid));
}

std::size_t write_mask(const CoverageMask& m, std::ostream& out) { return write_bytes(encode_mask(m), out); }
CoverageMask read_mask(std::istream& in) { return decode_mask(slurp(in)); }

Bytes encode_labels(const PartLabelMap& labels) {
  labels.validate();
  Writer w;
  w.reserve(13 + 2 * labels.pixels());
  w.magic("PLBL");
  w.u8(kFormatVersion);
  w.u32(checked_u32(labels.height(), "height"));
  w.u32(checked_u32(labels.width(), "width"));
  for (std::uint16_t v : labels.indices()) w.u16(v);
  return w.take();
}

PartLabelMap decode_labels(std::span<const std::uint8_t> bytes, PartLabelMap::Legend legend) {
  Reader r(bytes);
  r.magic("PLBL", "part-label");
  r.version();
  const std::size_t dims_at = r.pos();
  const std::uint32_t h = r.u32();
  const std::uint32_t w = r.u32();
  r.expect_payload(checked_area(h, w, 1, 2, dims_at));
  std::vector<std::uint16_t> indices(static_cast<std::size_t>(h) * w);
  for (auto& v : indices) {
    const std::size_t at = r.pos();
    v = r.u16();
    if (v != 0 && !legend.contains(v)) {
      throw FormatError("label index " + std::to_string(v) + " missing from legend", at);
    }
  }
  PartLabelMap map(h, w, std::move(indices), std::move(legend));
  map.validate();
  return map;
}

std::string encode_legend(const PartLabelMap::Legend& legend) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [index, path] : legend) j[std::to_string(index)] = path;
  return j.dump(2) + "\n";
}

PartLabelMap::Legend decode_legend(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("legend JSON: ") + e.what(), e.byte);
  }
  if (!j.is_object()) throw FormatError("legend JSON must be an object", 0);
  PartLabelMap::Legend legend;
  for (const auto& [key, value] : j.items()) {
    std::size_t used = 0;
    unsigned long index = 0;
    try {
      index = std::stoul(key, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != key.size() || index == 0 || index > UINT16_MAX) {
      throw FormatError("legend key '" + key + "' is not an index in [1, 65535]", 0);
    }
    if (!value.is_string()) throw FormatError("legend value for '" + key + "' is not a string", 0);
    legend.emplace(static_cast<std::uint16_t>(index), value.get<std::string>());
  }
  return legend;
}

Bytes encode_png(const RgbRaster& image) {
  image.validate();
  const std::size_t n = image.pixels();
  std::vector<std::uint8_t> interleaved(3 * n);
  const auto data = image.data();
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      interleaved[3 * i + c] = static_cast<std::uint8_t>(std::lround(data[c * n + i] * 255.0));
    }
  }
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = checked_u32(image.width(), "width");
  png.height = checked_u32(image.height(), "height");
  png.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(png, size, 0, interleaved.data(), 0, nullptr)) {
    throw IoError(std::string("png encode: ") + png.message);
  }
  Bytes out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, interleaved.data(), 0, nullptr)) {
    throw IoError(std::string("png encode: ") + png.message);
  }
  out.resize(size);
  return out;
}

RgbRaster decode_png(std::span<const std::uint8_t> bytes) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    throw FormatError(std::string("png decode: ") + png.message, 0);
  }
  png.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> interleaved(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, interleaved.data(), 0, nullptr)) {
    png_image_free(&png);
    throw FormatError(std::string("png decode: ") + png.message, 0);
  }
  RgbRaster image(png.height, png.width);
  const std::size_t n = image.pixels();
  auto data = image.data();
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < n; ++i) data[c * n + i] = interleaved[3 * i + c] / 255.0;
  }
  return image;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return slurp(in);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp-" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.close();
    if (!out) {
      std::error_code ignored;
      std::filesystem::remove(tmp, ignored);
      throw IoError("failed writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename into '" + path.string() + "'");
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

AffordanceTensor load_tensor(const std::filesystem::path& path) { return decode_tensor(read_file(path)); }
CoverageMask load_mask(const std::filesystem::path& path) { return decode_mask(read_file(path)); }
RgbRaster load_png(const std::filesystem::path& path) { return decode_png(read_file(path)); }

PartLabelMap load_labels(const std::filesystem::path& plbl, const std::filesystem::path& legend_json) {
  return decode_labels(read_file(plbl), decode_legend(read_text_file(legend_json)));
}

}  // namespace afford
