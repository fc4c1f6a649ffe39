#pragma once

// Pinhole camera, anchor-relative translation parametrization and the
// translation losses. Lengths are meters, pixel quantities are pixels.

#include <cmath>
#include <cstddef>
#include <string>

#include "posekit/error.hpp"
#include "posekit/rotation.hpp"

namespace posekit {

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double px = 0.0;
  double py = 0.0;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw DomainError("camera focal lengths must be positive");
  }

  // From a row-major 3x3 K.
  static CameraIntrinsics from_k(const double* k) { return {k[0], k[4], k[2], k[5]}; }
};

struct AnchorPoint {
  double ax = 0.0;
  double ay = 0.0;
};

// Image-space center of grid cell (row, col) at the given stride.
inline AnchorPoint cell_anchor(std::size_t row, std::size_t col, std::size_t stride) {
  const double s = static_cast<double>(stride);
  return {(static_cast<double>(col) + 0.5) * s, (static_cast<double>(row) + 0.5) * s};
}

// Offsets (dx, dy) in pixels from the anchor to the projected center, plus depth.
struct TranslationParam {
  double dx = 0.0;
  double dy = 0.0;
  double tz = 1.0;
};

struct TranslationVector {
  double tx = 0.0;
  double ty = 0.0;
  double tz = 1.0;

  Vec3 vec() const { return {tx, ty, tz}; }
  static TranslationVector from(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
};

inline void require_positive_depth(double tz, const char* op) {
  if (!(tz > 0.0)) throw DomainError(std::string(op) + ": tz must be positive, got " + std::to_string(tz));
}

inline TranslationVector recover_translation(const TranslationParam& p, const AnchorPoint& a,
                                             const CameraIntrinsics& k) {
  require_positive_depth(p.tz, "recover_translation");
  k.validate();
  return {(a.ax + p.dx - k.px) * p.tz / k.fx, (a.ay + p.dy - k.py) * p.tz / k.fy, p.tz};
}

inline TranslationParam decompose_translation(const TranslationVector& t, const AnchorPoint& a,
                                              const CameraIntrinsics& k) {
  require_positive_depth(t.tz, "decompose_translation");
  k.validate();
  const double cx = t.tx * k.fx / t.tz + k.px;
  const double cy = t.ty * k.fy / t.tz + k.py;
  return {cx - a.ax, cy - a.ay, t.tz};
}

// Pixel where the camera-frame point projects.
inline Eigen::Vector2d project(const Vec3& p, const CameraIntrinsics& k) {
  return {k.fx * p.x() / p.z() + k.px, k.fy * p.y() / p.z() + k.py};
}

inline double tran_loss_xy(const TranslationVector& pred, const TranslationVector& gt) {
  return std::hypot(pred.tx - gt.tx, pred.ty - gt.ty);
}

inline double tran_loss_z(const TranslationVector& pred, const TranslationVector& gt) {
  return std::abs(pred.tz - gt.tz);
}

inline double translation_error(const TranslationVector& pred, const TranslationVector& gt) {
  const double dx = pred.tx - gt.tx, dy = pred.ty - gt.ty, dz = pred.tz - gt.tz;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace posekit
