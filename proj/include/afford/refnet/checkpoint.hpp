#ifndef AFFORD_REFNET_CHECKPOINT_HPP_
#define AFFORD_REFNET_CHECKPOINT_HPP_

#include <filesystem>

#include "afford/core/formats.hpp"
#include "afford/refnet/model.hpp"

namespace afford::refnet {

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
};

// "AFPW" | u8 version | u32 LE header length | JSON header (config, tensor
// names, shapes, payload byte offsets) | f64 LE payloads in tensor order.
Bytes encode_checkpoint(const ModelConfig& config, const ModelParams& params);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace afford::refnet

#endif  // AFFORD_REFNET_CHECKPOINT_HPP_
