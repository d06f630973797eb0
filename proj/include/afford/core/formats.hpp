#ifndef AFFORD_CORE_FORMATS_HPP_
#define AFFORD_CORE_FORMATS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "afford/core/types.hpp"

namespace afford {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint8_t kFormatVersion = 1;

// AFMT: "AFMT" | u8 version | u32 A | u32 H | u32 W | A*H*W f32, all LE.
// Values are narrowed to f32 on write.
std::size_t write_tensor(const AffordanceTensor& t, std::ostream& out);
AffordanceTensor read_tensor(std::istream& in);
Bytes encode_tensor(const AffordanceTensor& t);
AffordanceTensor decode_tensor(std::span<const std::uint8_t> bytes);

// AFMK: "AFMK" | u8 version | u32 H | u32 W | H*W u8 in {0,1}.
std::size_t write_mask(const CoverageMask& m, std::ostream& out);
CoverageMask read_mask(std::istream& in);
Bytes encode_mask(const CoverageMask& m);
CoverageMask decode_mask(std::span<const std::uint8_t> bytes);

// PLBL: "PLBL" | u8 version | u32 H | u32 W | H*W u16. The legend travels
// separately as a JSON object {"1": "table/top", ...}.
Bytes encode_labels(const PartLabelMap& labels);
PartLabelMap decode_labels(std::span<const std::uint8_t> bytes, PartLabelMap::Legend legend);
std::string encode_legend(const PartLabelMap::Legend& legend);
PartLabelMap::Legend decode_legend(const std::string& json_text);

// 8-bit RGB PNG; [0,1] <-> [0,255] with rounding on write.
Bytes encode_png(const RgbRaster& image);
RgbRaster decode_png(std::span<const std::uint8_t> bytes);

Bytes read_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

AffordanceTensor load_tensor(const std::filesystem::path& path);
CoverageMask load_mask(const std::filesystem::path& path);
RgbRaster load_png(const std::filesystem::path& path);
PartLabelMap load_labels(const std::filesystem::path& plbl, const std::filesystem::path& legend_json);

}  // namespace afford

#endif  // AFFORD_CORE_FORMATS_HPP_
