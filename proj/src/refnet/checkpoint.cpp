#include "afford/refnet/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <nlohmann/json.hpp>

#include "afford/core/errors.hpp"

namespace afford::refnet {

namespace {
constexpr char kMagic[4] = {'A', 'F', 'P', 'W'};
constexpr std::size_t kPrefix = 4 + 1 + 4;
}  // namespace

Bytes encode_checkpoint(const ModelConfig& config, const ModelParams& params) {
  nlohmann::ordered_json header;
  header["config"] = nlohmann::json(config);
  auto tensors = nlohmann::ordered_json::array();
  std::size_t offset = 0;
  for (const auto& t : params.tensors) {
    for (double v : t.values) {
      if (!std::isfinite(v)) throw ValidationError("parameter tensor '" + t.name + "' has a non-finite value");
    }
    tensors.push_back({{"name", t.name}, {"shape", t.shape}, {"encoder", t.encoder}, {"offset", offset},
                       {"count", t.values.size()}});
    offset += 8 * t.values.size();
  }
  header["tensors"] = std::move(tensors);
  header["payload_bytes"] = offset;
  const std::string text = header.dump();

  Bytes out;
  out.reserve(kPrefix + text.size() + offset);
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(kFormatVersion);
  const auto len = static_cast<std::uint32_t>(text.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
  out.insert(out.end(), text.begin(), text.end());
  const std::size_t payload_start = out.size();
  out.resize(payload_start + offset);
  std::uint8_t* p = out.data() + payload_start;
  for (const auto& t : params.tensors) {
    std::memcpy(p, t.values.data(), 8 * t.values.size());
    p += 8 * t.values.size();
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad checkpoint magic", 0);
  if (bytes.size() < kPrefix) throw FormatError("truncated checkpoint header", bytes.size());
  if (bytes[4] != kFormatVersion) throw FormatError("unsupported checkpoint version", 4);
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(bytes[5 + i]) << (8 * i);
  if (bytes.size() - kPrefix < len) throw FormatError("truncated checkpoint header", bytes.size());

  Checkpoint ck;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + kPrefix, bytes.begin() + kPrefix + len);
    ck.config = header.at("config").get<ModelConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what(), kPrefix);
  }
  try {
    ck.config.validate();
  } catch (const ArgumentError& e) {
    throw FormatError(std::string("checkpoint config: ") + e.what(), kPrefix);
  }
  ck.params = ModelParams::zeros(ck.config);

  const std::size_t payload_start = kPrefix + len;
  const std::size_t payload_size = bytes.size() - payload_start;
  const auto& tensors = header.at("tensors");
  if (!tensors.is_array() || tensors.size() != ck.params.tensors.size()) {
    throw FormatError("checkpoint tensor list does not match its config", kPrefix);
  }
  std::size_t expected_total = 0;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    auto& t = ck.params.tensors[i];
    const auto& meta = tensors[i];
    std::size_t offset = 0, count = 0;
    std::vector<std::size_t> shape;
    try {
      offset = meta.at("offset").get<std::size_t>();
      count = meta.at("count").get<std::size_t>();
      shape = meta.at("shape").get<std::vector<std::size_t>>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("checkpoint tensor entry: ") + e.what(), kPrefix);
    }
    if (meta.value("name", std::string{}) != t.name || shape != t.shape || count != t.values.size()) {
      throw FormatError("checkpoint tensor '" + t.name + "' does not match its config", kPrefix);
    }
    if (offset > payload_size || payload_size - offset < 8 * count) {
      throw FormatError("truncated payload for tensor '" + t.name + "'", bytes.size());
    }
    std::memcpy(t.values.data(), bytes.data() + payload_start + offset, 8 * count);
    for (std::size_t j = 0; j < count; ++j) {
      if (!std::isfinite(t.values[j])) throw FormatError("non-finite parameter", payload_start + offset + 8 * j);
    }
    expected_total += 8 * count;
  }
  if (expected_total != payload_size) {
    throw FormatError("checkpoint payload is " + std::to_string(payload_size) + " bytes, expected " +
                          std::to_string(expected_total),
                      payload_start);
  }
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace afford::refnet
