#pragma once

// Rotation representations (6D vector, matrix, unit quaternion), their
// conversions, and the two angle losses.

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>
#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include "posekit/error.hpp"
#include "posekit/random.hpp"

namespace posekit {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Continuous 6D rotation vector: two stacked 3-vectors (a1, a2).
struct Rot6D {
  std::array<double, 6> r{};

  Vec3 a1() const { return {r[0], r[1], r[2]}; }
  Vec3 a2() const { return {r[3], r[4], r[5]}; }
};

// 3x3 matrix known to lie on SO(3) (within the tolerance it was checked at).
class RotationMatrix {
 public:
  RotationMatrix() : m_(Mat3::Identity()) {}

  // Accepts m when |m^T m - I|_inf and |det m - 1| are both within tol.
  static RotationMatrix checked(const Mat3& m, double tol = 1e-5) {
    if (!m.allFinite()) throw DomainError("rotation matrix has non-finite entries");
    const double ortho = (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
    const double det = m.determinant();
    if (ortho > tol || std::abs(det - 1.0) > tol) {
      throw DomainError("matrix is not a rotation (orthogonality error " + std::to_string(ortho) + ", det " +
                        std::to_string(det) + ")");
    }
    return RotationMatrix(m);
  }

  static RotationMatrix unchecked(const Mat3& m) { return RotationMatrix(m); }

  // Nearest rotation in Frobenius norm (polar factor with det forced to +1).
  static RotationMatrix project(const Mat3& m) {
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 u = svd.matrixU();
    const Mat3 v = svd.matrixV();
    if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
    return RotationMatrix(u * v.transpose());
  }

  static RotationMatrix about_axis(const Vec3& axis, double angle) {
    return RotationMatrix(Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix());
  }

  const Mat3& matrix() const { return m_; }
  double operator()(int r, int c) const { return m_(r, c); }

  RotationMatrix operator*(const RotationMatrix& o) const { return RotationMatrix(m_ * o.m_); }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }
  RotationMatrix transpose() const { return RotationMatrix(m_.transpose()); }

 private:
  explicit RotationMatrix(const Mat3& m) : m_(m) {}
  Mat3 m_;
};

// Unit quaternion (w, x, y, z) with the sign fixed so that w >= 0.
class UnitQuaternion {
 public:
  UnitQuaternion() = default;

  static UnitQuaternion normalized(double w, double x, double y, double z) {
    const double n = std::sqrt(w * w + x * x + y * y + z * z);
    if (!(n > 0.0) || !std::isfinite(n)) throw DegenerateError("quaternion has zero or non-finite norm");
    UnitQuaternion q;
    const double s = (w < 0.0 ? -1.0 : 1.0) / n;
    q.v_ = {w * s, x * s, y * s, z * s};
    return q;
  }

  // Takes components as given; only checks the norm.
  static UnitQuaternion checked(double w, double x, double y, double z, double tol = 1e-9) {
    const double n2 = w * w + x * x + y * y + z * z;
    if (!(std::abs(std::sqrt(n2) - 1.0) <= tol)) throw DomainError("quaternion is not unit norm");
    UnitQuaternion q;
    q.v_ = {w, x, y, z};
    return q;
  }

  double w() const { return v_[0]; }
  double x() const { return v_[1]; }
  double y() const { return v_[2]; }
  double z() const { return v_[3]; }
  UnitQuaternion negated() const {
    UnitQuaternion q;
    q.v_ = {-v_[0], -v_[1], -v_[2], -v_[3]};
    return q;
  }

 private:
  std::array<double, 4> v_{1.0, 0.0, 0.0, 0.0};
};

inline constexpr double kRot6dDegeneracy = 1e-12;

// Orthonormal frame built from a 6D vector: e1 = a1/|a1|, e2 = unit(e1 x a2),
// e3 = e1 x e2.
struct Rot6DFrame {
  Vec3 e1, e2, e3;
};

inline std::optional<Rot6DFrame> try_rot6d_frame(const Rot6D& r) {
  const Vec3 a1 = r.a1();
  const double n1 = a1.norm();
  if (!(n1 >= kRot6dDegeneracy) || !std::isfinite(n1)) return std::nullopt;
  const Vec3 e1 = a1 / n1;
  const Vec3 c = e1.cross(r.a2());
  const double n2 = c.norm();
  if (!(n2 >= kRot6dDegeneracy) || !std::isfinite(n2)) return std::nullopt;
  const Vec3 e2 = c / n2;
  return Rot6DFrame{e1, e2, e1.cross(e2)};
}

inline Rot6DFrame rot6d_frame(const Rot6D& r) {
  auto f = try_rot6d_frame(r);
  if (!f) throw DegenerateError("degenerate 6D rotation: |a1| or |e1 x a2| below 1e-12");
  return *f;
}

// Matrix columns are (e1, -e3, e2): e1 along a1, -e3 the component of a2
// orthogonal to e1, e2 their cross product. With this stacking the first two
// columns of any rotation map back to the same rotation.
inline RotationMatrix frame_to_matrix(const Rot6DFrame& f) {
  Mat3 m;
  m.col(0) = f.e1;
  m.col(1) = -f.e3;
  m.col(2) = f.e2;
  return RotationMatrix::unchecked(m);
}

inline std::optional<RotationMatrix> try_rot6d_to_matrix(const Rot6D& r) {
  auto f = try_rot6d_frame(r);
  if (!f) return std::nullopt;
  return frame_to_matrix(*f);
}

inline RotationMatrix rot6d_to_matrix(const Rot6D& r) { return frame_to_matrix(rot6d_frame(r)); }

// First two columns of R, flattened column by column.
inline Rot6D matrix_to_rot6d(const RotationMatrix& R) {
  const Mat3& m = R.matrix();
  return Rot6D{{m(0, 0), m(1, 0), m(2, 0), m(0, 1), m(1, 1), m(2, 1)}};
}

inline double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }

// Angle of the relative rotation R_gt^T R_pred, in radians within [0, pi].
inline double geodesic_loss(const RotationMatrix& gt, const RotationMatrix& pred) {
  const double trace = (gt.matrix().transpose() * pred.matrix()).trace();
  return std::acos(clamp_unit((trace - 1.0) / 2.0));
}

// d(geodesic_loss)/d(R_pred) = -R_gt / (2 sin theta).
inline Mat3 geodesic_loss_grad(const RotationMatrix& gt, const RotationMatrix& pred) {
  const double theta = geodesic_loss(gt, pred);
  constexpr double kMargin = 1e-3;
  if (theta < kMargin || theta > std::numbers::pi - kMargin) {
    throw DegenerateError("geodesic_loss_grad: angle " + std::to_string(theta) + " too close to 0 or pi");
  }
  return -gt.matrix() / (2.0 * std::sin(theta));
}

// 2 acos(|<q_gt, q_pred>|), in radians within [0, pi].
inline double quat_loss(const UnitQuaternion& gt, const UnitQuaternion& pred) {
  const double dot = gt.w() * pred.w() + gt.x() * pred.x() + gt.y() * pred.y() + gt.z() * pred.z();
  return 2.0 * std::acos(clamp_unit(std::abs(dot)));
}

// Shepperd's method: pivot on the largest of (trace, diagonal entries).
inline UnitQuaternion matrix_to_quat(const RotationMatrix& R) {
  const Mat3& m = R.matrix();
  const double tr = m.trace();
  double w, x, y, z;
  if (tr >= m(0, 0) && tr >= m(1, 1) && tr >= m(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + tr);
    w = 0.25 * s;
    x = (m(2, 1) - m(1, 2)) / s;
    y = (m(0, 2) - m(2, 0)) / s;
    z = (m(1, 0) - m(0, 1)) / s;
  } else if (m(0, 0) >= m(1, 1) && m(0, 0) >= m(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + m(0, 0) - m(1, 1) - m(2, 2));
    w = (m(2, 1) - m(1, 2)) / s;
    x = 0.25 * s;
    y = (m(0, 1) + m(1, 0)) / s;
    z = (m(0, 2) + m(2, 0)) / s;
  } else if (m(1, 1) >= m(2, 2)) {
    const double s = 2.0 * std::sqrt(1.0 + m(1, 1) - m(0, 0) - m(2, 2));
    w = (m(0, 2) - m(2, 0)) / s;
    x = (m(0, 1) + m(1, 0)) / s;
    y = 0.25 * s;
    z = (m(1, 2) + m(2, 1)) / s;
  } else {
    const double s = 2.0 * std::sqrt(1.0 + m(2, 2) - m(0, 0) - m(1, 1));
    w = (m(1, 0) - m(0, 1)) / s;
    x = (m(0, 2) + m(2, 0)) / s;
    y = (m(1, 2) + m(2, 1)) / s;
    z = 0.25 * s;
  }
  return UnitQuaternion::normalized(w, x, y, z);
}

inline RotationMatrix quat_to_matrix(const UnitQuaternion& q) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  Mat3 m;
  m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),  //
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),   //
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return RotationMatrix::unchecked(m);
}

// Uniformly distributed rotation (normalized Gaussian quaternion).
inline UnitQuaternion random_quaternion(Rng& rng) {
  for (;;) {
    const double w = rng.normal(), x = rng.normal(), y = rng.normal(), z = rng.normal();
    if (w * w + x * x + y * y + z * z > 1e-12) return UnitQuaternion::normalized(w, x, y, z);
  }
}

inline RotationMatrix random_rotation(Rng& rng) { return quat_to_matrix(random_quaternion(rng)); }

inline Vec3 random_unit_vector(Rng& rng) {
  for (;;) {
    const Vec3 v(rng.normal(), rng.normal(), rng.normal());
    const double n = v.norm();
    if (n > 1e-9) return v / n;
  }
}

}  // namespace posekit
