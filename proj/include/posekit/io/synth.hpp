#pragma once

// Synthetic BOP-format dataset with perturbed predictions.
//
// Layout under `out`:
//   test/000000/scene_gt.json, test/000000/scene_camera.json
//   models/models_info.json, models/obj_XXXXXX.ply
//   preds.csv
//
// Random stream (one Rng seeded with `seed`), consumed in this order:
//   for each model id 1..n_objects: 3 semi-axes, then kModelPoints unit vectors;
//   for each image, for each object id 1..n_objects: ground-truth rotation,
//   tx, ty, tz, rotation-noise axis, translation-noise direction, score.

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>

#include <nlohmann/json.hpp>
#include "posekit/camera.hpp"
#include "posekit/io/bop.hpp"
#include "posekit/io/ply.hpp"
#include "posekit/io/results.hpp"
#include "posekit/io/text.hpp"
#include "posekit/random.hpp"

namespace posekit::io {

inline constexpr std::size_t kModelPoints = 256;
inline constexpr CameraIntrinsics kSynthCamera{572.4114, 573.57043, 325.2611, 242.04899};

struct SynthOptions {
  std::uint64_t seed = 0;
  std::size_t n_images = 10;
  std::size_t n_objects = 5;
  double rot_deg = 0.0;
  double trans_m = 0.0;
};

struct SynthPaths {
  fs::path scene_dir;
  fs::path models_dir;
  fs::path predictions;
};

// Every third model is a spheroid about z and declared continuously symmetric.
inline bool synth_symmetric(int model_id) { return model_id % 3 == 0; }

inline SynthPaths synth_fixture(const fs::path& out, const SynthOptions& opt) {
  if (!(opt.rot_deg >= 0.0) || !(opt.trans_m >= 0.0)) throw DomainError("synth_fixture: noise must be >= 0");
  if (opt.n_objects == 0) throw DomainError("synth_fixture: need at least one object");
  Rng rng(opt.seed);
  SynthPaths paths{out / "test" / "000000", out / "models", out / "preds.csv"};

  json info = json::object();
  for (std::size_t k = 1; k <= opt.n_objects; ++k) {
    const int id = static_cast<int>(k);
    double a = rng.uniform(20.0, 60.0), b = rng.uniform(20.0, 60.0);
    const double c = rng.uniform(20.0, 60.0);
    if (synth_symmetric(id)) b = a;
    std::vector<Vec3> points;
    for (std::size_t i = 0; i < kModelPoints; ++i) {
      const Vec3 u = random_unit_vector(rng);
      points.emplace_back(a * u.x(), b * u.y(), c * u.z());
    }
    json entry = {{"diameter", compute_diameter(points)}};
    if (synth_symmetric(id))
      entry["symmetries_continuous"] = json::array({{{"axis", {0, 0, 1}}, {"offset", {0, 0, 0}}}});
    info[std::to_string(id)] = entry;
    write_file(paths.models_dir / model_filename(id), format_ply(points));
  }
  write_file(paths.models_dir / "models_info.json", info.dump(2) + "\n");

  json gt = json::object();
  json cam = json::object();
  std::vector<PosePrediction> preds;
  const double angle = opt.rot_deg * std::numbers::pi / 180.0;
  for (std::size_t im = 0; im < opt.n_images; ++im) {
    json objects = json::array();
    for (std::size_t k = 1; k <= opt.n_objects; ++k) {
      const RotationMatrix R = random_rotation(rng);
      const double tx = rng.uniform(-0.15, 0.15), ty = rng.uniform(-0.1, 0.1), tz = rng.uniform(0.6, 1.2);
      // Quantized to whole micrometers so the millimeter JSON re-reads exactly.
      Vec3 t_mm;
      for (int i = 0; i < 3; ++i) t_mm[i] = std::round(m_to_mm(Vec3(tx, ty, tz)[i]) * 1000.0) / 1000.0;
      const Vec3 t = mm_to_m(t_mm);
      const Vec3 axis = random_unit_vector(rng);
      const Vec3 dir = random_unit_vector(rng);
      const double score = rng.uniform(0.5, 1.0);

      json obj;
      obj["obj_id"] = k;
      std::vector<double> r;
      for (int i = 0; i < 9; ++i) r.push_back(R.matrix()(i / 3, i % 3));
      obj["cam_R_m2c"] = r;
      obj["cam_t_m2c"] = {t_mm.x(), t_mm.y(), t_mm.z()};
      objects.push_back(obj);

      PosePrediction p;
      p.image_id = static_cast<int>(im);
      p.class_id = static_cast<int>(k);
      p.score = score;
      p.pose.R = angle == 0.0 ? R : R * RotationMatrix::about_axis(axis, angle);
      p.pose.t = t + opt.trans_m * dir;
      p.time = 0.0;
      preds.push_back(p);
    }
    gt[std::to_string(im)] = objects;
    const CameraIntrinsics& k = kSynthCamera;
    cam[std::to_string(im)] = {{"cam_K", {k.fx, 0.0, k.px, 0.0, k.fy, k.py, 0.0, 0.0, 1.0}}, {"depth_scale", 1.0}};
  }
  write_file(paths.scene_dir / "scene_gt.json", gt.dump(2) + "\n");
  write_file(paths.scene_dir / "scene_camera.json", cam.dump(2) + "\n");
  write_file(paths.predictions, format_predictions(preds));
  return paths;
}

}  // namespace posekit::io
