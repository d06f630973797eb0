#ifndef AFFORD_SIMKIT_SCENE_HPP_
#define AFFORD_SIMKIT_SCENE_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "afford/core/types.hpp"
#include "afford/mapgen/dataset.hpp"
#include "afford/transfer/transfer_table.hpp"

namespace afford::simkit {

// World units: the room back wall spans x in [0, 8], y in [0, 4], y pointing
// down. Everything outside that rectangle is void.
inline constexpr double kRoomWidth = 8.0;
inline constexpr double kRoomHeight = 4.0;
inline constexpr std::size_t kMinViewport = 32;

enum class RoomKind { kLivingRoom, kKitchen };

const char* room_kind_name(RoomKind kind);
RoomKind parse_room_kind(std::string_view name);

struct Material {
  std::array<double, 3> base{};
  double noise = 0.0;  // texture amplitude
  double gloss = 0.0;  // highlight strength in [0,1]
  bool operator==(const Material&) const = default;
};

enum class ShapeKind { kRect, kEllipse };

// How a part is lit: by the room, by daylight through a window, or by itself.
enum class Lighting { kIndoor, kOutdoor, kEmissive };

struct Part {
  std::string label;  // catalog label path
  ShapeKind shape = ShapeKind::kRect;
  // Axis-aligned bounds in world units.
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double corner_radius = 0.0;
  Material material;
  Lighting lighting = Lighting::kIndoor;
  bool operator==(const Part&) const = default;
};

struct ObjectInstance {
  std::string kind;
  Material material;  // material of the object's main part
  std::array<double, 2> anchor{};
  int depth_layer = 0;  // higher layers paint over lower ones
  double shape_t = 0.0;
  std::vector<Part> parts;
  bool operator==(const ObjectInstance&) const = default;
};

struct Illumination {
  double outdoor_intensity = 1.0;
  double indoor_intensity = 1.0;
  double day_factor = 1.0;
  bool operator==(const Illumination&) const = default;
};

struct Camera {
  double trajectory_t = 0.5;
  std::array<double, 2> position_jitter{};
  double zoom = 1.5;
  bool operator==(const Camera&) const = default;
};

struct SceneSpec {
  std::uint64_t seed = 0;
  RoomKind room_kind = RoomKind::kLivingRoom;
  std::vector<ObjectInstance> objects;
  Illumination illumination;
  Camera camera;
  bool operator==(const SceneSpec&) const = default;
};

void to_json(nlohmann::json& j, const SceneSpec& s);
void from_json(const nlohmann::json& j, SceneSpec& s);

// Every label path the renderer can emit, in legend order (index i + 1).
const std::vector<std::string>& catalog_label_paths();
PartLabelMap::Legend catalog_legend();

// Object kinds that sample_scene always places for a room kind.
const std::vector<std::string>& mandatory_kinds(RoomKind kind);

// Materials a part with this label path may be given.
const std::vector<Material>& allowed_materials(std::string_view label_path);

SceneSpec sample_scene(std::uint64_t seed, RoomKind room_kind);

// World rectangle seen by the camera for a viewport of this aspect ratio.
struct ViewWindow {
  double left, top, width, height;
};
ViewWindow view_window(const Camera& camera, std::size_t width, std::size_t height);

std::pair<RgbRaster, PartLabelMap> render_scene(const SceneSpec& spec, std::size_t width, std::size_t height);

// Throws ConfigError naming the first catalog path `table` cannot resolve.
void check_table_covers_catalog(const transfer::TransferTable& table);

mapgen::Sample render_affordance_pass(const SceneSpec& spec, const transfer::TransferTable& table, std::size_t width,
                                      std::size_t height);

struct DatasetSpec {
  std::size_t count = 1;
  std::uint64_t seed = 0;
  double room_mix = 0.5;  // probability of a kitchen
  std::size_t width = 64;
  std::size_t height = 64;
};

// Scene for sample `index` of a dataset; seed = dataset seed XOR index.
SceneSpec dataset_scene(const DatasetSpec& spec, std::size_t index);

// Writes samples plus manifest.json into out_dir and returns the manifest path.
std::filesystem::path generate_dataset(const DatasetSpec& spec, const transfer::TransferTable& table,
                                       const std::filesystem::path& out_dir);

// In-memory variant of generate_dataset.
std::vector<mapgen::Sample> generate_samples(const DatasetSpec& spec, const transfer::TransferTable& table);

// The transfer table shipped with the project.
transfer::TransferTable bundled_table();

}  // namespace afford::simkit

#endif  // AFFORD_SIMKIT_SCENE_HPP_
