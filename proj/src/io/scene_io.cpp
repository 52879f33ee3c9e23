#include "meshloc/io/scene_io.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

#include "meshloc/common/errors.hpp"
#include "meshloc/io/image_io.hpp"

namespace meshloc::io {

using nlohmann::json;

void write_scene_meta(const std::string& path, const SceneMeta& meta) {
  json j;
  j["seed"] = meta.seed;
  j["intrinsics"] = {{"fx", meta.intrinsics.fx}, {"fy", meta.intrinsics.fy},
                     {"cx", meta.intrinsics.cx}, {"cy", meta.intrinsics.cy},
                     {"width", meta.intrinsics.width}, {"height", meta.intrinsics.height}};
  j["depth_scale"] = meta.depth_scale;
  j["palette"] = json::array();
  for (const auto& entry : meta.palette)
    j["palette"].push_back({{"name", entry.name},
                            {"color", {entry.color.x(), entry.color.y(), entry.color.z()}},
                            {"dynamic", entry.dynamic}});
  j["frames"] = json::array();
  for (const auto& frame : meta.frames)
    j["frames"].push_back(
        {{"id", frame.id}, {"config", frame.config}, {"rgb", frame.rgb}, {"depth", frame.depth}});
  std::ofstream os(path);
  if (!os) throw DataError(path + ": cannot open for writing");
  os << j.dump(2) << "\n";
}

SceneMeta read_scene_meta(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError(path + ": cannot open");
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw DataError(path + ": invalid JSON: " + e.what());
  }
  try {
    SceneMeta meta;
    meta.seed = j.value("seed", 0ull);
    const auto& in = j.at("intrinsics");
    meta.intrinsics = {in.at("fx").get<double>(), in.at("fy").get<double>(),
                       in.at("cx").get<double>(), in.at("cy").get<double>(),
                       in.at("width").get<int>(), in.at("height").get<int>()};
    meta.depth_scale = j.at("depth_scale").get<double>();
    for (const auto& p : j.value("palette", json::array())) {
      scene::PaletteEntry entry;
      entry.name = p.at("name").get<std::string>();
      const auto& c = p.at("color");
      entry.color = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
      entry.dynamic = p.value("dynamic", false);
      meta.palette.push_back(entry);
    }
    for (const auto& f : j.value("frames", json::array())) {
      FrameEntry entry;
      entry.id = f.at("id").get<int>();
      entry.config = f.value("config", 0);
      entry.rgb = f.at("rgb").get<std::string>();
      entry.depth = f.at("depth").get<std::string>();
      meta.frames.push_back(entry);
    }
    if (!meta.intrinsics.valid()) throw DataError(path + ": invalid intrinsics");
    return meta;
  } catch (const json::exception& e) {
    throw DataError(path + ": missing or malformed key: " + e.what());
  }
}

scene::FrameRecord load_frame(const std::string& scene_dir, const SceneMeta& meta,
                              const FrameEntry& entry, const scene::RigidTransform& pose,
                              int target_width, int target_height) {
  namespace fs = std::filesystem;
  scene::FrameRecord frame;
  frame.frame_id = entry.id;
  frame.config_id = entry.config;
  frame.pose = pose;
  frame.rgb = read_ppm((fs::path(scene_dir) / entry.rgb).string());
  frame.depth = read_pgm16((fs::path(scene_dir) / entry.depth).string(), meta.depth_scale);
  if (frame.rgb.width != frame.depth.width || frame.rgb.height != frame.depth.height)
    throw DataError("frame " + std::to_string(entry.id) + ": RGB and depth sizes disagree");
  if (frame.rgb.width != target_width || frame.rgb.height != target_height) {
    frame.rgb = resize_bilinear(frame.rgb, target_width, target_height);
    frame.depth = resize_nearest(frame.depth, target_width, target_height);
  }
  return frame;
}

}  // namespace meshloc::io
