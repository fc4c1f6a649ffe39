#pragma once

// BOP dataset layout: scene_gt.json / scene_camera.json per scene directory,
// models_info.json plus obj_XXXXXX.ply model files. Files are millimeters;
// everything returned is meters.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "posekit/camera.hpp"
#include "posekit/io/ply.hpp"
#include "posekit/io/text.hpp"
#include "posekit/metrics.hpp"

namespace posekit::io {

namespace fs = std::filesystem;
using nlohmann::json;

// Power of ten taking millimeters to meters. Conversions go through decimal
// text (scale_pow10) so file values are rounded once.
inline constexpr int kMillimeterExp = -3;

inline double mm_to_m(double mm) { return scale_pow10(mm, kMillimeterExp); }
inline double m_to_mm(double m) { return scale_pow10(m, -kMillimeterExp); }
inline Vec3 mm_to_m(const Vec3& v) { return {mm_to_m(v.x()), mm_to_m(v.y()), mm_to_m(v.z())}; }
inline constexpr double kRotationTolerance = 1e-3;

// Rotations within 1e-3 of orthonormal are snapped to the nearest rotation;
// anything further off is a data error.
inline RotationMatrix rotation_from_row_major(const std::vector<double>& r, const std::string& where) {
  if (r.size() != 9) throw DataError(where + ": rotation must have 9 entries");
  Mat3 m;
  for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = r[static_cast<std::size_t>(i)];
  if (!m.allFinite()) throw DataError(where + ": non-finite rotation");
  const double ortho = (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
  const double det = m.determinant();
  if (ortho > kRotationTolerance || std::abs(det - 1.0) > kRotationTolerance)
    throw DataError(where + ": matrix is not a rotation (orthogonality error " + format_double(ortho) + ")");
  return RotationMatrix::project(m);
}

inline json parse_json(const std::string& bytes, const std::string& source) {
  try {
    return json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw ParseError(source, e.byte, e.what());
  }
}

inline std::vector<double> number_array(const json& j, const char* key, std::size_t n, const std::string& where) {
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_array())
    throw DataError(where + ": missing array '" + key + "'");
  const json& a = j.at(key);
  if (a.size() != n) throw DataError(where + ": '" + key + "' must have " + std::to_string(n) + " entries");
  std::vector<double> out;
  for (const json& v : a) {
    if (!v.is_number()) throw DataError(where + ": '" + key + "' holds a non-number");
    out.push_back(v.get<double>());
  }
  return out;
}

inline int parse_id(const std::string& key, const std::string& where) {
  const auto v = parse_long(key);
  if (!v) throw DataError(where + ": key '" + key + "' is not an integer id");
  return static_cast<int>(*v);
}

struct SceneAnnotations {
  int scene_id = 0;
  std::vector<GroundTruthInstance> instances;  // sorted by image id, file order within an image
  std::map<int, CameraIntrinsics> cameras;     // per image id
};

// Scene id from a directory name such as "000048"; 0 when not numeric.
inline int scene_id_from_dir(const fs::path& dir) {
  const auto v = parse_long(dir.filename().string());
  return v ? static_cast<int>(*v) : 0;
}

inline SceneAnnotations load_scene(const fs::path& dir, int scene_id) {
  SceneAnnotations scene;
  scene.scene_id = scene_id;
  const fs::path gt_path = dir / "scene_gt.json";
  const fs::path cam_path = dir / "scene_camera.json";
  const json gt = parse_json(read_file(gt_path), gt_path.string());
  if (!gt.is_object()) throw DataError(gt_path.string() + ": top level must be an object");
  std::map<int, const json*> images;
  for (const auto& [key, value] : gt.items()) images[parse_id(key, gt_path.string())] = &value;
  for (const auto& [im_id, list] : images) {
    const std::string where = gt_path.string() + " image " + std::to_string(im_id);
    if (!list->is_array()) throw DataError(where + ": expected a list of objects");
    for (const json& obj : *list) {
      if (!obj.is_object() || !obj.contains("obj_id") || !obj.at("obj_id").is_number_integer())
        throw DataError(where + ": missing integer obj_id");
      GroundTruthInstance inst;
      inst.scene_id = scene_id;
      inst.image_id = im_id;
      inst.class_id = obj.at("obj_id").get<int>();
      inst.pose.R = rotation_from_row_major(number_array(obj, "cam_R_m2c", 9, where), where);
      const auto t = number_array(obj, "cam_t_m2c", 3, where);
      inst.pose.t = mm_to_m(Vec3(t[0], t[1], t[2]));
      if (!(inst.pose.t.z() > 0.0)) throw DataError(where + ": t_z must be positive");
      scene.instances.push_back(inst);
    }
  }
  if (fs::exists(cam_path)) {
    const json cam = parse_json(read_file(cam_path), cam_path.string());
    if (!cam.is_object()) throw DataError(cam_path.string() + ": top level must be an object");
    for (const auto& [key, value] : cam.items()) {
      const std::string where = cam_path.string() + " image " + key;
      const auto k = number_array(value, "cam_K", 9, where);
      const CameraIntrinsics intr = CameraIntrinsics::from_k(k.data());
      if (!(intr.fx > 0.0) || !(intr.fy > 0.0)) throw DataError(where + ": non-positive focal length");
      scene.cameras[parse_id(key, cam_path.string())] = intr;
    }
  }
  return scene;
}

inline SceneAnnotations load_scene(const fs::path& dir) { return load_scene(dir, scene_id_from_dir(dir)); }

// Either a single scene directory or a split directory holding scene
// subdirectories.
inline std::vector<SceneAnnotations> load_dataset(const fs::path& dir) {
  if (fs::exists(dir / "scene_gt.json")) return {load_scene(dir)};
  if (!fs::is_directory(dir)) throw DataError(dir.string() + ": not a directory");
  std::vector<fs::path> subdirs;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_directory() && fs::exists(entry.path() / "scene_gt.json")) subdirs.push_back(entry.path());
  std::sort(subdirs.begin(), subdirs.end());
  if (subdirs.empty()) throw DataError(dir.string() + ": no scene_gt.json found");
  std::vector<SceneAnnotations> scenes;
  for (const fs::path& p : subdirs) scenes.push_back(load_scene(p));
  return scenes;
}

inline std::string model_filename(int obj_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "obj_%06d.ply", obj_id);
  return buf;
}

// Points in meters; diameter and symmetry come from the caller.
inline ObjectModel load_model(const fs::path& ply_path, int model_id, double diameter_m, bool symmetric) {
  ObjectModel m;
  m.model_id = model_id;
  for (const Vec3& p : load_ply(ply_path)) m.points.push_back(mm_to_m(p));
  m.diameter = diameter_m;
  m.symmetric = symmetric;
  m.validate();
  return m;
}

// All models listed in models_info.json. Any symmetries_discrete or
// symmetries_continuous entry marks a model symmetric.
inline std::map<int, ObjectModel> load_models(const fs::path& dir) {
  const fs::path info_path = dir / "models_info.json";
  const json info = parse_json(read_file(info_path), info_path.string());
  if (!info.is_object()) throw DataError(info_path.string() + ": top level must be an object");
  std::map<int, ObjectModel> models;
  for (const auto& [key, value] : info.items()) {
    const int id = parse_id(key, info_path.string());
    const std::string where = info_path.string() + " model " + key;
    if (!value.is_object() || !value.contains("diameter") || !value.at("diameter").is_number())
      throw DataError(where + ": missing diameter");
    const bool symmetric = (value.contains("symmetries_discrete") && !value.at("symmetries_discrete").empty()) ||
                           (value.contains("symmetries_continuous") && !value.at("symmetries_continuous").empty());
    models[id] = load_model(dir / model_filename(id), id, mm_to_m(value.at("diameter").get<double>()), symmetric);
  }
  return models;
}

}  // namespace posekit::io
