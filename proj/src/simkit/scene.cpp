#include "afford/simkit/scene.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <system_error>
#include <unistd.h>

#include "afford/core/errors.hpp"
#include "afford/core/formats.hpp"
#include "afford/core/rng.hpp"

namespace afford::simkit {

namespace {

using transfer::TransferTable;

Material mat(double r, double g, double b, double noise, double gloss) { return Material{{r, g, b}, noise, gloss}; }

const std::map<std::string, std::vector<Material>, std::less<>>& palettes() {
  static const std::map<std::string, std::vector<Material>, std::less<>> p = [] {
    std::map<std::string, std::vector<Material>, std::less<>> m;
    const std::vector<Material> wood = {mat(0.60, 0.42, 0.25, 0.06, 0.2), mat(0.35, 0.22, 0.14, 0.05, 0.3),
                                        mat(0.85, 0.85, 0.82, 0.02, 0.4)};
    const std::vector<Material> metal = {mat(0.75, 0.75, 0.78, 0.02, 0.8), mat(0.80, 0.65, 0.30, 0.02, 0.7)};
    const std::vector<Material> fabric = {mat(0.60, 0.15, 0.15, 0.04, 0.0), mat(0.20, 0.30, 0.55, 0.04, 0.0),
                                          mat(0.25, 0.45, 0.30, 0.04, 0.0), mat(0.50, 0.35, 0.20, 0.05, 0.2)};
    m["void"] = {mat(0.04, 0.04, 0.05, 0.0, 0.0)};
    m["wall"] = {mat(0.85, 0.82, 0.74, 0.03, 0.0), mat(0.78, 0.84, 0.88, 0.03, 0.0), mat(0.88, 0.80, 0.78, 0.03, 0.0),
                 mat(0.80, 0.86, 0.76, 0.03, 0.0), mat(0.90, 0.89, 0.86, 0.02, 0.0)};
    m["floor"] = {mat(0.55, 0.38, 0.22, 0.08, 0.2), mat(0.45, 0.30, 0.18, 0.08, 0.2), mat(0.62, 0.48, 0.30, 0.07, 0.2),
                  mat(0.42, 0.42, 0.46, 0.05, 0.3), mat(0.30, 0.26, 0.24, 0.05, 0.1)};
    m["road"] = {mat(0.32, 0.32, 0.34, 0.05, 0.0), mat(0.40, 0.38, 0.35, 0.05, 0.0)};
    m["table/top"] = wood;
    m["table/leg"] = wood;
    m["chair/seat"] = fabric;
    m["chair/backrest"] = fabric;
    m["chair/leg"] = {mat(0.50, 0.35, 0.20, 0.05, 0.2), mat(0.20, 0.20, 0.22, 0.02, 0.5)};
    m["lamp/bulb"] = {mat(1.00, 0.95, 0.75, 0.0, 0.0), mat(0.95, 0.92, 0.85, 0.0, 0.0)};
    m["lamp/stand"] = {mat(0.20, 0.20, 0.22, 0.02, 0.5), mat(0.70, 0.58, 0.30, 0.02, 0.6)};
    m["door/panel"] = {mat(0.55, 0.36, 0.20, 0.06, 0.2), mat(0.92, 0.92, 0.90, 0.02, 0.2),
                       mat(0.35, 0.25, 0.18, 0.05, 0.2)};
    m["door/handle"] = metal;
    m["door/knob"] = metal;
    m["window/frame"] = {mat(0.95, 0.95, 0.95, 0.01, 0.2), mat(0.30, 0.22, 0.16, 0.04, 0.2)};
    m["window/pane"] = {mat(0.55, 0.75, 0.95, 0.02, 0.3), mat(0.65, 0.80, 0.92, 0.03, 0.3)};
    m["display"] = {mat(0.05, 0.05, 0.07, 0.01, 0.6), mat(0.10, 0.12, 0.18, 0.01, 0.6)};
    m["button-panel"] = {mat(0.93, 0.93, 0.90, 0.01, 0.3), mat(0.70, 0.70, 0.72, 0.01, 0.3)};
    m["fireplace"] = {mat(0.55, 0.25, 0.18, 0.10, 0.0), mat(0.50, 0.48, 0.45, 0.10, 0.0)};
    m["towel"] = {mat(0.95, 0.95, 0.95, 0.03, 0.0), mat(0.35, 0.60, 0.80, 0.03, 0.0), mat(0.85, 0.45, 0.50, 0.03, 0.0)};
    m["rug"] = {mat(0.65, 0.20, 0.20, 0.08, 0.0), mat(0.25, 0.30, 0.55, 0.08, 0.0), mat(0.75, 0.65, 0.45, 0.08, 0.0)};
    m["vase"] = {mat(0.30, 0.55, 0.70, 0.02, 0.7), mat(0.85, 0.80, 0.70, 0.02, 0.5)};
    m["pot"] = {mat(0.70, 0.70, 0.72, 0.02, 0.7), mat(0.15, 0.15, 0.15, 0.02, 0.4), mat(0.75, 0.35, 0.20, 0.02, 0.5)};
    m["plate"] = {mat(0.97, 0.97, 0.95, 0.01, 0.6), mat(0.85, 0.90, 0.95, 0.01, 0.6)};
    m["cutlery/fork"] = {mat(0.78, 0.78, 0.80, 0.01, 0.8)};
    m["cutlery/knife"] = {mat(0.78, 0.78, 0.80, 0.01, 0.8)};
    return m;
  }();
  return p;
}

std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) { return splitmix64(h ^ splitmix64(v)); }

// Deterministic value noise in [-1, 1] on a world-space grid.
double cell_noise(std::uint64_t part_seed, double wx, double wy) {
  constexpr double kCell = 0.08;
  const auto ix = static_cast<std::int64_t>(std::floor(wx / kCell));
  const auto iy = static_cast<std::int64_t>(std::floor(wy / kCell));
  const std::uint64_t h =
      hash_combine(hash_combine(part_seed, static_cast<std::uint64_t>(ix)), static_cast<std::uint64_t>(iy));
  return static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;
}

bool contains(const Part& p, double x, double y) {
  if (x < p.x0 || x >= p.x1 || y < p.y0 || y >= p.y1) return false;
  if (p.shape == ShapeKind::kEllipse) {
    const double cx = 0.5 * (p.x0 + p.x1), cy = 0.5 * (p.y0 + p.y1);
    const double rx = 0.5 * (p.x1 - p.x0), ry = 0.5 * (p.y1 - p.y0);
    const double dx = (x - cx) / rx, dy = (y - cy) / ry;
    return dx * dx + dy * dy <= 1.0;
  }
  const double r = p.corner_radius;
  if (r <= 0.0) return true;
  const double qx = std::max({p.x0 + r - x, 0.0, x - (p.x1 - r)});
  const double qy = std::max({p.y0 + r - y, 0.0, y - (p.y1 - r)});
  return qx * qx + qy * qy <= r * r;
}

class SceneBuilder {
 public:
  SceneBuilder(std::uint64_t seed, RoomKind kind) : rng_(seed) {
    spec_.seed = seed;
    spec_.room_kind = kind;
  }

  SceneSpec build() {
    auto& il = spec_.illumination;
    il.day_factor = rng_.uniform();
    il.outdoor_intensity = rng_.uniform(0.6, 1.2);
    il.indoor_intensity = rng_.uniform(0.3, 1.0);
    auto& cam = spec_.camera;
    cam.trajectory_t = rng_.uniform();
    cam.position_jitter = {rng_.uniform(-0.3, 0.3), rng_.uniform(-0.15, 0.15)};
    cam.zoom = rng_.uniform(1.4, 2.0);

    floor_y_ = rng_.uniform(2.2, 2.6);
    add_structure();

    const bool kitchen = spec_.room_kind == RoomKind::kKitchen;
    std::vector<std::string> wall_items;
    std::vector<std::string> furniture = {"table"};
    if (kitchen) {
      if (rng_.chance(0.7)) wall_items.push_back("window");
      if (rng_.chance(0.6)) wall_items.push_back("door");
      if (rng_.chance(0.3)) wall_items.push_back("display");
      if (rng_.chance(0.6)) wall_items.push_back("button-panel");
      if (rng_.chance(0.7)) wall_items.push_back("towel");
      if (rng_.chance(0.7)) furniture.push_back("chair");
      if (rng_.chance(0.4)) furniture.push_back("lamp");
    } else {
      wall_items = {"window", "door", "display"};
      if (rng_.chance(0.5)) wall_items.push_back("fireplace");
      if (rng_.chance(0.6)) wall_items.push_back("button-panel");
      if (rng_.chance(0.2)) wall_items.push_back("towel");
      furniture.push_back("chair");
      furniture.push_back("lamp");
    }
    shuffle(wall_items);
    shuffle(furniture);

    const double wall_slot = 7.6 / static_cast<double>(std::max<std::size_t>(wall_items.size(), 1));
    for (std::size_t i = 0; i < wall_items.size(); ++i) {
      const double cx = 0.2 + wall_slot * (static_cast<double>(i) + 0.5) + rng_.uniform(-0.1, 0.1) * wall_slot;
      add_wall_item(wall_items[i], cx, 0.85 * wall_slot);
    }
    if (!kitchen || rng_.chance(0.3)) add_rug();
    const double floor_slot = 7.6 / static_cast<double>(furniture.size());
    for (std::size_t i = 0; i < furniture.size(); ++i) {
      const double cx = 0.2 + floor_slot * (static_cast<double>(i) + 0.5) + rng_.uniform(-0.1, 0.1) * floor_slot;
      add_furniture(furniture[i], cx, 0.85 * floor_slot);
    }
    return std::move(spec_);
  }

 private:
  void shuffle(std::vector<std::string>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng_.below(i)]);
  }

  Material pick(std::string_view label) {
    const auto& options = allowed_materials(label);
    return options[rng_.below(options.size())];
  }

  Part part(std::string label, ShapeKind shape, double x0, double y0, double x1, double y1, double radius = 0.0,
            Lighting lighting = Lighting::kIndoor) {
    Part p;
    p.material = pick(label);
    p.label = std::move(label);
    p.shape = shape;
    p.x0 = x0;
    p.y0 = y0;
    p.x1 = x1;
    p.y1 = y1;
    p.corner_radius = radius;
    p.lighting = lighting;
    return p;
  }

  ObjectInstance& object(std::string kind, double ax, double ay, int layer) {
    ObjectInstance o;
    o.kind = std::move(kind);
    o.anchor = {ax, ay};
    o.depth_layer = layer;
    o.shape_t = rng_.uniform();
    spec_.objects.push_back(std::move(o));
    return spec_.objects.back();
  }

  static void finish(ObjectInstance& o) { o.material = o.parts.front().material; }

  void add_structure() {
    auto& wall = object("wall", 0.0, 0.0, 0);
    wall.parts.push_back(part("wall", ShapeKind::kRect, 0.0, 0.0, kRoomWidth, floor_y_));
    finish(wall);
    auto& floor = object("floor", 0.0, floor_y_, 0);
    floor.parts.push_back(part("floor", ShapeKind::kRect, 0.0, floor_y_, kRoomWidth, kRoomHeight));
    finish(floor);
  }

  void add_wall_item(const std::string& kind, double cx, double max_w) {
    if (kind == "window") {
      const double w = std::min(rng_.uniform(1.0, 1.3), max_w), h = rng_.uniform(0.9, 1.2);
      const double top = rng_.uniform(0.4, 0.7);
      auto& o = object(kind, cx, top, 1);
      const double r = o.shape_t * 0.15;
      const double x0 = cx - w / 2, x1 = cx + w / 2, y1 = top + h;
      o.parts.push_back(part("window/frame", ShapeKind::kRect, x0, top, x1, y1, r));
      const double inset = 0.08;
      o.parts.push_back(
          part("window/pane", ShapeKind::kRect, x0 + inset, top + inset, x1 - inset, y1 - inset, 0.0, Lighting::kOutdoor));
      const double road_h = (h - 2 * inset) * rng_.uniform(0.25, 0.35);
      o.parts.push_back(
          part("road", ShapeKind::kRect, x0 + inset, y1 - inset - road_h, x1 - inset, y1 - inset, 0.0, Lighting::kOutdoor));
      finish(o);
    } else if (kind == "door") {
      const double w = std::min(rng_.uniform(0.85, 1.0), max_w);
      const double h = std::min(rng_.uniform(1.9, 2.1), floor_y_ - 0.15);
      const double bottom = floor_y_ + 0.05;
      auto& o = object(kind, cx, bottom, 1);
      const double x0 = cx - w / 2, x1 = cx + w / 2;
      o.parts.push_back(part("door/panel", ShapeKind::kRect, x0, bottom - h, x1, bottom, o.shape_t * 0.05));
      const double hy = bottom - h * 0.5;
      if (rng_.chance(0.5)) {
        o.parts.push_back(part("door/knob", ShapeKind::kEllipse, x1 - 0.22, hy - 0.06, x1 - 0.1, hy + 0.06));
      } else {
        o.parts.push_back(part("door/handle", ShapeKind::kRect, x1 - 0.32, hy - 0.04, x1 - 0.08, hy + 0.04, 0.02));
      }
      finish(o);
    } else if (kind == "display") {
      const double w = std::min(rng_.uniform(0.8, 1.1), max_w), h = rng_.uniform(0.5, 0.65);
      const double cy = rng_.uniform(1.1, 1.4);
      auto& o = object(kind, cx, cy, 1);
      o.parts.push_back(part("display", ShapeKind::kRect, cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2, o.shape_t * 0.05));
      finish(o);
    } else if (kind == "fireplace") {
      const double w = std::min(rng_.uniform(1.0, 1.3), max_w), h = rng_.uniform(0.8, 1.0);
      const double bottom = floor_y_ + 0.05;
      auto& o = object(kind, cx, bottom, 1);
      o.parts.push_back(part("fireplace", ShapeKind::kRect, cx - w / 2, bottom - h, cx + w / 2, bottom, o.shape_t * 0.2));
      finish(o);
    } else if (kind == "button-panel") {
      const double w = rng_.uniform(0.12, 0.16), h = rng_.uniform(0.18, 0.24);
      const double cy = rng_.uniform(1.3, 1.5);
      auto& o = object(kind, cx, cy, 1);
      o.parts.push_back(
          part("button-panel", ShapeKind::kRect, cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2, o.shape_t * 0.03));
      finish(o);
    } else if (kind == "towel") {
      const double w = std::min(rng_.uniform(0.3, 0.4), max_w), h = rng_.uniform(0.45, 0.6);
      const double top = rng_.uniform(0.9, 1.2);
      auto& o = object(kind, cx, top, 1);
      o.parts.push_back(part("towel", ShapeKind::kRect, cx - w / 2, top, cx + w / 2, top + h, o.shape_t * 0.06));
      finish(o);
    } else {
      throw ArgumentError("no wall item named '" + kind + "'");
    }
  }

  void add_rug() {
    const double w = rng_.uniform(2.0, 3.0), h = rng_.uniform(0.5, 0.8);
    const double cx = rng_.uniform(1.5, 6.5);
    const double cy = rng_.uniform(floor_y_ + 0.3 + h / 2, kRoomHeight - 0.1 - h / 2);
    auto& o = object("rug", cx, cy, 1);
    const ShapeKind shape = o.shape_t > 0.7 ? ShapeKind::kEllipse : ShapeKind::kRect;
    o.parts.push_back(part("rug", shape, cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2, o.shape_t * 0.3));
    finish(o);
  }

  void add_furniture(const std::string& kind, double cx, double max_w) {
    const double contact = rng_.uniform(floor_y_ + 0.4, kRoomHeight - 0.15);
    if (kind == "table") {
      add_table(cx, contact, max_w);
    } else if (kind == "chair") {
      const double w = std::min(rng_.uniform(0.6, 0.8), max_w);
      auto& o = object(kind, cx, contact, 2);
      const double x0 = cx - w / 2, x1 = cx + w / 2;
      const double seat_bottom = contact - rng_.uniform(0.45, 0.55), seat_top = seat_bottom - 0.15;
      const double back_h = rng_.uniform(0.6, 0.8);
      o.parts.push_back(
          part("chair/backrest", ShapeKind::kRect, x0 + 0.05, seat_top - back_h, x1 - 0.05, seat_top, o.shape_t * 0.12));
      o.parts.push_back(part("chair/leg", ShapeKind::kRect, x0 + 0.03, seat_bottom, x0 + 0.11, contact));
      o.parts.push_back(part("chair/leg", ShapeKind::kRect, x1 - 0.11, seat_bottom, x1 - 0.03, contact));
      o.parts.push_back(part("chair/seat", ShapeKind::kRect, x0, seat_top, x1, seat_bottom, o.shape_t * 0.05));
      // The front legs share one material.
      o.parts[2].material = o.parts[1].material;
      o.material = o.parts.back().material;
    } else if (kind == "lamp") {
      auto& o = object(kind, cx, contact, 2);
      const double h = rng_.uniform(1.4, 1.8);
      const double bw = rng_.uniform(0.3, 0.4), bh = rng_.uniform(0.25, 0.35);
      o.parts.push_back(part("lamp/stand", ShapeKind::kRect, cx - 0.04, contact - h, cx + 0.04, contact));
      o.parts.push_back(part("lamp/bulb", ShapeKind::kEllipse, cx - bw / 2, contact - h - bh * 0.8, cx + bw / 2,
                             contact - h + bh * 0.2, 0.0, Lighting::kEmissive));
      finish(o);
    } else {
      throw ArgumentError("no furniture named '" + kind + "'");
    }
  }

  void add_table(double cx, double contact, double max_w) {
    const bool kitchen = spec_.room_kind == RoomKind::kKitchen;
    const double w = std::clamp(rng_.uniform(1.6, 2.2), std::min(1.2, max_w), max_w);
    const double th = rng_.uniform(0.3, 0.4), leg_h = rng_.uniform(0.6, 0.8);
    const double x0 = cx - w / 2, x1 = cx + w / 2;
    const double top_y1 = contact - leg_h, top_y0 = top_y1 - th;
    auto& table = object("table", cx, contact, 2);
    table.parts.push_back(part("table/top", ShapeKind::kRect, x0, top_y0, x1, top_y1, table.shape_t * 0.5 * th));
    table.parts.push_back(part("table/leg", ShapeKind::kRect, x0 + 0.08, top_y1, x0 + 0.2, contact));
    table.parts.push_back(part("table/leg", ShapeKind::kRect, x1 - 0.2, top_y1, x1 - 0.08, contact));
    table.parts[1].material = table.parts[0].material;
    table.parts[2].material = table.parts[0].material;
    finish(table);

    const double mid_y = 0.5 * (top_y0 + top_y1);
    if (kitchen || rng_.chance(0.5)) {
      // Vase or pot stands on the top surface and may rise above it.
      const bool pot = kitchen;
      const double pw = pot ? rng_.uniform(0.4, 0.5) : rng_.uniform(0.18, 0.24);
      const double ph = pot ? rng_.uniform(0.3, 0.4) : rng_.uniform(0.4, 0.55);
      const double px = pot ? x0 + 0.8 * w : x0 + 0.15 * w;
      auto& o = object(pot ? "pot" : "vase", px, mid_y, 3);
      o.parts.push_back(part(o.kind, ShapeKind::kRect, px - pw / 2, mid_y - ph, px + pw / 2, mid_y,
                             o.shape_t * 0.5 * std::min(pw, ph)));
      finish(o);
    }
    if (kitchen && rng_.chance(0.2)) {
      const double px = x0 + 0.15 * w;
      auto& o = object("vase", px, mid_y, 3);
      o.parts.push_back(part("vase", ShapeKind::kRect, px - 0.1, mid_y - 0.45, px + 0.1, mid_y, o.shape_t * 0.1));
      finish(o);
    }
    if (rng_.chance(kitchen ? 0.6 : 0.7)) {
      const double pw = rng_.uniform(0.45, 0.6), ph = 0.6 * th;
      const double pc = cx + rng_.uniform(-0.1, 0.1) * w;
      auto& plate = object("plate", pc, mid_y, 3);
      plate.parts.push_back(part("plate", ShapeKind::kEllipse, pc - pw / 2, mid_y - ph / 2, pc + pw / 2, mid_y + ph / 2));
      finish(plate);
      // Cutlery lies beside the plate, inside the top surface.
      const double ch = 0.7 * th;
      const double fx1 = std::max(plate.parts[0].x0 - 0.03, x0 + 0.07);
      const double kx0 = std::min(plate.parts[0].x1 + 0.03, x1 - 0.07);
      auto& cutlery = object("cutlery", pc, mid_y, 3);
      cutlery.parts.push_back(part("cutlery/fork", ShapeKind::kRect, fx1 - 0.05, mid_y - ch / 2, fx1, mid_y + ch / 2));
      cutlery.parts.push_back(part("cutlery/knife", ShapeKind::kRect, kx0, mid_y - ch / 2, kx0 + 0.05, mid_y + ch / 2));
      finish(cutlery);
    }
  }

  Rng rng_;
  SceneSpec spec_;
  double floor_y_ = 2.4;
};

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

double quantize(double v) { return std::round(clamp01(v) * 255.0) / 255.0; }

struct DrawItem {
  const Part* part;
  std::uint16_t label;
  std::uint64_t seed;
};

}  // namespace

const char* room_kind_name(RoomKind kind) { return kind == RoomKind::kKitchen ? "kitchen" : "living_room"; }

RoomKind parse_room_kind(std::string_view name) {
  if (name == "kitchen") return RoomKind::kKitchen;
  if (name == "living_room") return RoomKind::kLivingRoom;
  throw ArgumentError("unknown room kind '" + std::string(name) + "'");
}

const std::vector<std::string>& catalog_label_paths() {
  static const std::vector<std::string> paths = {
      "void",        "floor",      "wall",        "road",       "table/top",     "table/leg",     "chair/seat",
      "chair/backrest", "chair/leg", "lamp/bulb", "lamp/stand", "door/panel",    "door/handle",   "door/knob",
      "window/frame", "window/pane", "display",   "button-panel", "fireplace",   "towel",         "rug",
      "vase",        "pot",        "plate",       "cutlery/fork", "cutlery/knife"};
  return paths;
}

PartLabelMap::Legend catalog_legend() {
  PartLabelMap::Legend legend;
  const auto& paths = catalog_label_paths();
  for (std::size_t i = 0; i < paths.size(); ++i) legend[static_cast<std::uint16_t>(i + 1)] = paths[i];
  return legend;
}

const std::vector<std::string>& mandatory_kinds(RoomKind kind) {
  static const std::vector<std::string> living = {"floor", "wall", "window", "table", "chair",
                                                  "lamp",  "door", "display", "rug"};
  static const std::vector<std::string> kitchen = {"floor", "wall", "table", "pot"};
  return kind == RoomKind::kKitchen ? kitchen : living;
}

const std::vector<Material>& allowed_materials(std::string_view label_path) {
  const auto& p = palettes();
  const auto it = p.find(label_path);
  if (it == p.end()) throw ArgumentError("no material set for '" + std::string(label_path) + "'");
  return it->second;
}

SceneSpec sample_scene(std::uint64_t seed, RoomKind room_kind) { return SceneBuilder(seed, room_kind).build(); }

ViewWindow view_window(const Camera& camera, std::size_t width, std::size_t height) {
  const double w = 6.0 / camera.zoom;
  const double h = w * static_cast<double>(height) / static_cast<double>(width);
  const double cx = 1.5 + 5.0 * camera.trajectory_t + camera.position_jitter[0];
  const double cy = 2.4 + camera.position_jitter[1];
  return {cx - w / 2, cy - h / 2, w, h};
}

std::pair<RgbRaster, PartLabelMap> render_scene(const SceneSpec& spec, std::size_t width, std::size_t height) {
  if (width < kMinViewport || height < kMinViewport) {
    throw ArgumentError("viewport " + std::to_string(width) + "x" + std::to_string(height) + " is smaller than " +
                        std::to_string(kMinViewport) + "x" + std::to_string(kMinViewport));
  }
  const auto legend = catalog_legend();
  std::map<std::string, std::uint16_t, std::less<>> index_of_path;
  for (const auto& [i, path] : legend) index_of_path[path] = i;

  std::vector<std::size_t> order(spec.objects.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return spec.objects[a].depth_layer < spec.objects[b].depth_layer;
  });
  std::vector<DrawItem> items;
  for (std::size_t oi : order) {
    const auto& obj = spec.objects[oi];
    for (std::size_t pi = 0; pi < obj.parts.size(); ++pi) {
      const auto& p = obj.parts[pi];
      const auto it = index_of_path.find(p.label);
      if (it == index_of_path.end()) throw ArgumentError("part label '" + p.label + "' is not in the catalog");
      items.push_back({&p, it->second, hash_combine(hash_combine(spec.seed, oi), pi)});
    }
  }

  const auto& il = spec.illumination;
  const double ambient = 0.3 + 0.5 * il.day_factor * il.outdoor_intensity + 0.35 * il.indoor_intensity;
  const double outdoor = 0.1 + 0.9 * il.day_factor * il.outdoor_intensity;
  const double emissive = 0.5 + 0.5 * il.indoor_intensity;
  constexpr double kGradient = 0.25;
  const Material& void_material = allowed_materials("void").front();
  const std::uint16_t void_label = index_of_path.at("void");

  const ViewWindow view = view_window(spec.camera, width, height);
  RgbRaster image(height, width);
  PartLabelMap labels(height, width, std::vector<std::uint16_t>(width * height, 0), legend);

  for (std::size_t r = 0; r < height; ++r) {
    const double v = (static_cast<double>(r) + 0.5) / static_cast<double>(height);
    const double wy = view.top + v * view.height;
    const double indoor = ambient * (1.0 + kGradient * (0.5 - v));
    for (std::size_t x = 0; x < width; ++x) {
      const double wx = view.left + (static_cast<double>(x) + 0.5) / static_cast<double>(width) * view.width;
      const DrawItem* hit = nullptr;
      if (wx >= 0.0 && wx < kRoomWidth && wy >= 0.0 && wy < kRoomHeight) {
        for (auto it = items.rbegin(); it != items.rend(); ++it) {
          if (contains(*it->part, wx, wy)) {
            hit = &*it;
            break;
          }
        }
      }
      std::array<double, 3> rgb;
      if (hit == nullptr) {
        labels.at(r, x) = void_label;
        rgb = void_material.base;
      } else {
        const Part& p = *hit->part;
        labels.at(r, x) = hit->label;
        const double n = p.material.noise * cell_noise(hit->seed, wx, wy);
        const double local = (wy - p.y0) / (p.y1 - p.y0);
        const double highlight = p.material.gloss * 0.25 * std::max(0.0, 1.0 - std::abs(local - 0.3) / 0.2);
        const double light = p.lighting == Lighting::kOutdoor    ? outdoor
                              : p.lighting == Lighting::kEmissive ? emissive
                                                                  : indoor;
        for (int c = 0; c < 3; ++c) rgb[c] = (p.material.base[c] + n + highlight) * light;
      }
      for (int c = 0; c < 3; ++c) image.at(c, r, x) = quantize(rgb[c]);
    }
  }
  return {std::move(image), std::move(labels)};
}

void check_table_covers_catalog(const TransferTable& table) {
  for (const auto& path : catalog_label_paths()) {
    if (!transfer::resolve(table, path)) {
      throw ConfigError("transfer table cannot resolve catalog label path '" + path + "'");
    }
  }
}

mapgen::Sample render_affordance_pass(const SceneSpec& spec, const TransferTable& table, std::size_t width,
                                      std::size_t height) {
  check_table_covers_catalog(table);
  auto [image, labels] = render_scene(spec, width, height);
  auto [target, mask] = transfer::resolve_map(table, labels);
  return mapgen::Sample{std::move(image), std::move(target), std::move(mask), "sim-" + std::to_string(spec.seed)};
}

SceneSpec dataset_scene(const DatasetSpec& spec, std::size_t index) {
  const std::uint64_t seed = spec.seed ^ static_cast<std::uint64_t>(index);
  Rng kind_rng(hash_combine(seed, 0x6b696e64ULL));
  const RoomKind kind = kind_rng.uniform() < spec.room_mix ? RoomKind::kKitchen : RoomKind::kLivingRoom;
  return sample_scene(seed, kind);
}

namespace {

void check_dataset_spec(const DatasetSpec& spec) {
  if (spec.count < 1) throw ArgumentError("count must be >= 1");
  if (!(spec.room_mix >= 0.0 && spec.room_mix <= 1.0)) throw ArgumentError("room mix must be in [0, 1]");
  if (spec.width < kMinViewport || spec.height < kMinViewport) {
    throw ArgumentError("image size must be at least " + std::to_string(kMinViewport) + "x" +
                        std::to_string(kMinViewport));
  }
}

std::string stem_for(std::size_t index) {
  std::string digits = std::to_string(index);
  if (digits.size() < 5) digits.insert(0, 5 - digits.size(), '0');
  return "sample_" + digits;
}

}  // namespace

std::vector<mapgen::Sample> generate_samples(const DatasetSpec& spec, const TransferTable& table) {
  check_dataset_spec(spec);
  check_table_covers_catalog(table);
  std::vector<mapgen::Sample> out;
  out.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) {
    auto sample = render_affordance_pass(dataset_scene(spec, i), table, spec.width, spec.height);
    sample.source_id = stem_for(i);
    out.push_back(std::move(sample));
  }
  return out;
}

std::filesystem::path generate_dataset(const DatasetSpec& spec, const TransferTable& table,
                                       const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  check_dataset_spec(spec);
  check_table_covers_catalog(table);

  // Everything goes to a sibling staging directory first and is moved into
  // place only after the last sample is written.
  const fs::path target = out_dir.empty() ? fs::path(".") : out_dir;
  const fs::path staging = fs::path(target.string() + ".staging-" + std::to_string(::getpid()));
  std::error_code ec;
  fs::remove_all(staging, ec);
  try {
    fs::create_directories(staging);
    std::vector<mapgen::ManifestEntry> entries;
    const std::string legend_json = encode_legend(catalog_legend());
    write_file_atomic(staging / "legend.json", legend_json);
    for (std::size_t i = 0; i < spec.count; ++i) {
      const SceneSpec scene = dataset_scene(spec, i);
      auto [image, labels] = render_scene(scene, spec.width, spec.height);
      auto [tensor, mask] = transfer::resolve_map(table, labels);
      const std::string stem = stem_for(i);
      mapgen::Sample sample{std::move(image), std::move(tensor), std::move(mask), stem};
      entries.push_back(mapgen::save_sample(sample, staging, stem));
      write_file_atomic(staging / (stem + ".plbl"), encode_labels(labels));
    }
    write_file_atomic(staging / "manifest.json", mapgen::encode_manifest(entries));

    fs::create_directories(target);
    for (const auto& entry : fs::directory_iterator(staging)) {
      fs::rename(entry.path(), target / entry.path().filename());
    }
    fs::remove_all(staging);
  } catch (const fs::filesystem_error& e) {
    fs::remove_all(staging, ec);
    throw IoError(e.what());
  } catch (...) {
    fs::remove_all(staging, ec);
    throw;
  }
  return target / "manifest.json";
}

void to_json(nlohmann::json& j, const SceneSpec& s) {
  auto material = [](const Material& m) {
    return nlohmann::json{{"base", m.base}, {"noise", m.noise}, {"gloss", m.gloss}};
  };
  nlohmann::json objects = nlohmann::json::array();
  for (const auto& o : s.objects) {
    nlohmann::json parts = nlohmann::json::array();
    for (const auto& p : o.parts) {
      parts.push_back({{"label", p.label},
                       {"shape", p.shape == ShapeKind::kEllipse ? "ellipse" : "rect"},
                       {"bounds", {p.x0, p.y0, p.x1, p.y1}},
                       {"corner_radius", p.corner_radius},
                       {"material", material(p.material)},
                       {"lighting", p.lighting == Lighting::kOutdoor    ? "outdoor"
                                    : p.lighting == Lighting::kEmissive ? "emissive"
                                                                        : "indoor"}});
    }
    objects.push_back({{"kind", o.kind},
                       {"material", material(o.material)},
                       {"anchor", o.anchor},
                       {"depth_layer", o.depth_layer},
                       {"shape_t", o.shape_t},
                       {"parts", std::move(parts)}});
  }
  nlohmann::json out{
      {"seed", s.seed},
      {"room_kind", room_kind_name(s.room_kind)},
      {"illumination",
       {{"outdoor_intensity", s.illumination.outdoor_intensity},
        {"indoor_intensity", s.illumination.indoor_intensity},
        {"day_factor", s.illumination.day_factor}}},
      {"camera",
       {{"trajectory_t", s.camera.trajectory_t}, {"position_jitter", s.camera.position_jitter}, {"zoom", s.camera.zoom}}},
      {"objects", std::move(objects)}};
  j = std::move(out);
}

void from_json(const nlohmann::json& j, SceneSpec& s) {
  auto material = [](const nlohmann::json& m) {
    return Material{m.at("base").get<std::array<double, 3>>(), m.at("noise").get<double>(), m.at("gloss").get<double>()};
  };
  s.seed = j.at("seed").get<std::uint64_t>();
  s.room_kind = parse_room_kind(j.at("room_kind").get<std::string>());
  const auto& il = j.at("illumination");
  s.illumination = {il.at("outdoor_intensity").get<double>(), il.at("indoor_intensity").get<double>(),
                    il.at("day_factor").get<double>()};
  const auto& cam = j.at("camera");
  s.camera = {cam.at("trajectory_t").get<double>(), cam.at("position_jitter").get<std::array<double, 2>>(),
              cam.at("zoom").get<double>()};
  s.objects.clear();
  for (const auto& o : j.at("objects")) {
    ObjectInstance obj;
    obj.kind = o.at("kind").get<std::string>();
    obj.material = material(o.at("material"));
    obj.anchor = o.at("anchor").get<std::array<double, 2>>();
    obj.depth_layer = o.at("depth_layer").get<int>();
    obj.shape_t = o.at("shape_t").get<double>();
    for (const auto& p : o.at("parts")) {
      Part part;
      part.label = p.at("label").get<std::string>();
      part.shape = p.at("shape").get<std::string>() == "ellipse" ? ShapeKind::kEllipse : ShapeKind::kRect;
      const auto b = p.at("bounds").get<std::array<double, 4>>();
      part.x0 = b[0];
      part.y0 = b[1];
      part.x1 = b[2];
      part.y1 = b[3];
      part.corner_radius = p.at("corner_radius").get<double>();
      part.material = material(p.at("material"));
      const auto lighting = p.at("lighting").get<std::string>();
      part.lighting = lighting == "outdoor" ? Lighting::kOutdoor : lighting == "emissive" ? Lighting::kEmissive
                                                                                           : Lighting::kIndoor;
      obj.parts.push_back(std::move(part));
    }
    s.objects.push_back(std::move(obj));
  }
}

}  // namespace afford::simkit
