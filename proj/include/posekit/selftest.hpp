#pragma once

// Quick property checks over every module, runnable from the command line.

#include <chrono>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "posekit/camera.hpp"
#include "posekit/fpn.hpp"
#include "posekit/heads.hpp"
#include "posekit/io/results.hpp"
#include "posekit/io/weights.hpp"
#include "posekit/metrics.hpp"
#include "posekit/network.hpp"
#include "posekit/random.hpp"
#include "posekit/rotation.hpp"
#include "posekit/tensor.hpp"
#include "posekit/visibility.hpp"

namespace posekit {

struct SelfCheck {
  std::string module;
  std::string name;
  std::function<bool()> run;
};

namespace selftest_detail {

inline double max_abs_diff(const FeatureMap& a, const FeatureMap& b) {
  if (a.shape() != b.shape()) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

inline double max_abs_diff(const Mat3& a, const Mat3& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace selftest_detail

inline std::vector<SelfCheck> selftest_checks() {
  using namespace selftest_detail;
  std::vector<SelfCheck> checks;
  auto add_check = [&](const char* module, const char* name, std::function<bool()> fn) {
    checks.push_back({module, name, std::move(fn)});
  };

  add_check("tensor-core", "conv2d is linear in its input", [] {
    Rng rng(1);
    ConvParams p = ConvParams::random(rng, 3, 2, 3, 3);
    std::fill(p.bias.begin(), p.bias.end(), 0.0);
    const FeatureMap x = random_feature_map(rng, 2, 5, 6), y = random_feature_map(rng, 2, 5, 6);
    const FeatureMap lhs = conv2d(add(scale(x, 2.0), scale(y, -0.5)), p);
    const FeatureMap rhs = add(scale(conv2d(x, p), 2.0), scale(conv2d(y, p), -0.5));
    return max_abs_diff(lhs, rhs) < 1e-12;
  });
  add_check("tensor-core", "rotate90 clockwise undoes counterclockwise", [] {
    Rng rng(2);
    const FeatureMap x = random_feature_map(rng, 3, 4, 5);
    for (RotationAxis a : {RotationAxis::H, RotationAxis::W})
      if (rotate90(rotate90(x, a, RotationDirection::Ccw), a, RotationDirection::Cw) != x) return false;
    return true;
  });
  add_check("tensor-core", "group norm with unit affine gives zero-mean groups", [] {
    Rng rng(3);
    const FeatureMap y = group_norm(random_feature_map(rng, 4, 3, 3), GroupNormParams::identity(4, 2));
    for (std::size_t g = 0; g < 2; ++g) {
      double s = 0.0;
      for (std::size_t c = 2 * g; c < 2 * g + 2; ++c)
        for (double v : y.channel(c)) s += v;
      if (std::abs(s) > 1e-9) return false;
    }
    return true;
  });

  add_check("rotation-geometry", "rot6d output is a rotation", [] {
    Rng rng(4);
    for (int i = 0; i < 1000; ++i) {
      Rot6D r;
      for (double& v : r.r) v = rng.normal();
      const Mat3 m = rot6d_to_matrix(r).matrix();
      if (max_abs_diff(m.transpose() * m, Mat3::Identity()) > 1e-9 || std::abs(m.determinant() - 1.0) > 1e-9)
        return false;
    }
    return true;
  });
  add_check("rotation-geometry", "rot6d of a matrix's first columns returns the matrix", [] {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
      const RotationMatrix R = random_rotation(rng);
      if (max_abs_diff(rot6d_to_matrix(matrix_to_rot6d(R)).matrix(), R.matrix()) > 1e-9) return false;
    }
    return true;
  });
  add_check("rotation-geometry", "geodesic and quaternion losses agree", [] {
    Rng rng(6);
    for (int i = 0; i < 1000; ++i) {
      const RotationMatrix a = random_rotation(rng), b = random_rotation(rng);
      if (std::abs(geodesic_loss(a, b) - quat_loss(matrix_to_quat(a), matrix_to_quat(b))) > 1e-6) return false;
    }
    return true;
  });

  add_check("translation-camera", "decompose inverts recover", [] {
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
      const CameraIntrinsics k{rng.uniform(300, 900), rng.uniform(300, 900), rng.uniform(200, 400),
                               rng.uniform(150, 300)};
      const AnchorPoint a{rng.uniform(0, 640), rng.uniform(0, 480)};
      const TranslationVector t{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(0.2, 2.0)};
      const TranslationVector back = recover_translation(decompose_translation(t, a, k), a, k);
      if ((back.vec() - t.vec()).norm() > 1e-9 * t.vec().norm()) return false;
    }
    return true;
  });

  add_check("tsfpn-net", "fusion in bypass mode is the mean of the enhanced maps", [] {
    Rng rng(8);
    const FeatureMap h = random_feature_map(rng, 2, 4, 4), l = random_feature_map(rng, 2, 4, 4);
    const FeatureMap fused = ts_fm_fuse(h, l, TsfmWeights::random(rng), AttentionMode::Bypass);
    return fused == add(h, l);
  });
  add_check("tsfpn-net", "pyramid levels have strides 8..128 shapes", [] {
    Rng rng(9);
    const NetworkConfig c{4, 4, 4, 4, 4, 1, 2};
    const auto s = backbone_shapes(c, 160, 96);
    const FpnWeights w = FpnWeights::random(rng, 4, 4, 4, 4);
    const PyramidFeatures p = ts_fpn_forward(random_feature_map(rng, 4, s[0].height, s[0].width),
                                             random_feature_map(rng, 4, s[1].height, s[1].width),
                                             random_feature_map(rng, 4, s[2].height, s[2].width), w);
    const std::size_t hs[5] = {12, 6, 3, 2, 1}, ws[5] = {20, 10, 5, 3, 2};
    for (std::size_t l = 0; l < 5; ++l)
      if (p.levels[l].shape() != Shape3{4, hs[l], ws[l]}) return false;
    return true;
  });

  add_check("pose-heads", "zero refinement weights keep the initial grid", [] {
    Rng rng(10);
    const HeadConfig c{4, 4, 1, 2};
    RegressionBranchWeights w = RegressionBranchWeights::random(rng, c, 6);
    w.pitm = PitmWeights::zeros(c, 6);
    const FeatureMap f = random_feature_map(rng, 4, 5, 5);
    const FeatureMap init = pinm_forward(f, w.pinm).r_init;
    return regression_branch_forward(f, w, 1) == init && regression_branch_forward(f, w, 2) == init;
  });
  add_check("pose-heads", "score threshold keeps exactly the cells above it", [] {
    Rng rng(11);
    LevelPredictions lv{8, random_feature_map(rng, 1, 6, 6, -2, 2), FeatureMap(4, 6, 6, 1.0),
                        random_feature_map(rng, 6, 6, 6), FeatureMap(3, 6, 6, 1.0)};
    std::size_t expected = 0;
    for (double v : lv.class_logits.data()) expected += sigmoid(v) > 0.4;
    DecodeOptions opt;
    opt.nms = false;
    return decode_predictions({lv}, {500, 500, 24, 24}, opt).above_threshold == expected;
  });

  add_check("visibility-sampler", "uniform image gives alpha times normalized distance", [] {
    const RgbImage img(6, 6, {40, 80, 120});
    const PixelBox box{0, 0, 6, 6};
    const BoundarySeedSet seeds{{{0, 0}, {5, 0}, {0, 5}, {5, 5}}};
    const DiscrepancyMap v = discrepancy_map(img, box, seeds, {0.1, 8});
    for (long y = 0; y < 6; ++y)
      for (long x = 0; x < 6; ++x) {
        double best = std::numeric_limits<double>::infinity();
        for (const Pixel& s : seeds.seeds)
          best = std::min(best, std::hypot(double(x - s.x), double(y - s.y)));
        if (std::abs(v.at(x, y) - 0.1 * best / box.diagonal()) > 1e-9) return false;
      }
    return true;
  });
  add_check("visibility-sampler", "cells inside a distinct object are positive", [] {
    RgbImage img(32, 32, {20, 20, 20});
    img.fill_rect(8, 8, 16, 16, {230, 200, 40});
    const CellVisibility cv =
        cell_visibility(discrepancy_map(img, {4, 4, 24, 24}, seed_boundary({4, 4, 24, 24}, 4)), 8);
    return cv.mask[cv.index(1, 1)] && cv.mask[cv.index(2, 2)];
  });

  add_check("metrics-eval", "ADD-S never exceeds ADD", [] {
    Rng rng(12);
    for (int i = 0; i < 100; ++i) {
      ObjectModel m;
      for (int k = 0; k < 32; ++k) m.points.emplace_back(rng.normal(), rng.normal(), rng.normal());
      const RigidPose a{random_rotation(rng), Vec3::Random()}, b{random_rotation(rng), Vec3::Random()};
      if (adds_metric(m, a, b) > add_metric(m, a, b)) return false;
    }
    return true;
  });
  add_check("metrics-eval", "AUC of a single 0.05 error is 50", [] { return auc_metric({0.05}, 0.1) == 50.0; });

  add_check("bop-io-cli", "weight container round trip is bit-exact", [] {
    Rng rng(13);
    const NetworkWeights w = NetworkWeights::random(rng, {4, 4, 4, 4, 4, 2, 2});
    const std::string bytes = io::serialize_tensors(io::network_to_tensors(w));
    const NetworkWeights back = io::network_from_tensors(io::parse_tensors(bytes));
    return io::serialize_tensors(io::network_to_tensors(back)) == bytes;
  });
  add_check("bop-io-cli", "results CSV round trip", [] {
    Rng rng(14);
    std::vector<PosePrediction> p(3);
    for (auto& x : p) {
      x.score = rng.uniform();
      x.pose = {random_rotation(rng), Vec3(rng.uniform(), rng.uniform(), rng.uniform(0.5, 1.0))};
    }
    const auto q = io::parse_predictions(io::format_predictions(p));
    for (std::size_t i = 0; i < p.size(); ++i)
      if ((q[i].pose.t - p[i].pose.t).norm() > 1e-15 || std::abs(q[i].score - p[i].score) != 0.0) return false;
    return q.size() == p.size();
  });
  return checks;
}

inline const std::vector<std::string>& selftest_modules() {
  static const std::vector<std::string> kModules = {"tensor-core",   "rotation-geometry", "translation-camera",
                                                    "tsfpn-net",     "pose-heads",        "visibility-sampler",
                                                    "metrics-eval",  "bop-io-cli"};
  return kModules;
}

// Runs the checks (optionally one module's) and prints one PASS/FAIL line
// each. Returns the number of failures.
inline std::size_t run_selftest(std::ostream& out, const std::optional<std::string>& module = std::nullopt) {
  std::size_t failures = 0;
  for (const SelfCheck& c : selftest_checks()) {
    if (module && c.module != *module) continue;
    bool ok = false;
    std::string note;
    try {
      ok = c.run();
    } catch (const std::exception& e) {
      note = std::string(" (") + e.what() + ")";
    }
    failures += !ok;
    out << (ok ? "PASS " : "FAIL ") << c.module << ": " << c.name << note << "\n";
  }
  return failures;
}

}  // namespace posekit
