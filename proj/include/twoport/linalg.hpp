#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "twoport/errors.hpp"

namespace twoport {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;
using CMat2 = Eigen::Matrix2cd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Relative determinant threshold below which a 2x2 covariance is refused.
inline constexpr double kDegenerateRelDet = 1e-12;
/// Absolute floor on det(Sigma), guards against underflow.
inline constexpr double kDegenerateAbsDet = 1e-300;

inline double max_abs(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  return m.cwiseAbs().maxCoeff();
}

/// Closed-form inverse of a symmetric positive-definite 2x2 matrix.
///
/// Throws DegenerateCovariance when either diagonal entry is non-positive or
/// when det < 1e-12 * a11 * a22 (equivalently, the squared correlation
/// coefficient exceeds 1 - 1e-12).
inline Mat2 guarded_inverse(const Mat2& a) {
  const double a11 = a(0, 0);
  const double a22 = a(1, 1);
  const double off = 0.5 * (a(0, 1) + a(1, 0));
  if (!(a11 > 0.0) || !(a22 > 0.0)) {
    throw DegenerateCovariance("covariance has non-positive diagonal");
  }
  const double det = a11 * a22 - off * off;
  if (!(det > kDegenerateRelDet * a11 * a22) || !(det > kDegenerateAbsDet)) {
    throw DegenerateCovariance("covariance determinant " + std::to_string(det) +
                               " below degeneracy threshold");
  }
  Mat2 inv;
  inv << a22 / det, -off / det, -off / det, a11 / det;
  return inv;
}

/// Determinant of a guarded 2x2 covariance (call after guarded_inverse).
inline double det2(const Mat2& a) {
  const double off = 0.5 * (a(0, 1) + a(1, 0));
  return a(0, 0) * a(1, 1) - off * off;
}

/// Nearest representative of `angle` to `reference` modulo `period`.
inline double wrap_near(double angle, double reference, double period) {
  return angle - period * std::round((angle - reference) / period);
}

}  // namespace twoport
