#pragma once

#include <cmath>

#include "cmib/geom/vec3.hpp"

namespace cmib::geom {

/// Rotation quaternion stored as (w, x, y, z).
///
/// The struct itself is a plain aggregate so it can be filled from raw
/// buffers; use normalized()/canonical() (or from_components()) on ingestion
/// to establish the unit-norm and w >= 0 conventions.
struct Quat {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static constexpr Quat identity() { return {1.0, 0.0, 0.0, 0.0}; }

  // Normalized and hemisphere-canonicalized quaternion from raw components.
  static Quat from_components(double w, double x, double y, double z) {
    return Quat{w, x, y, z}.normalized().canonical();
  }

  static Quat from_axis_angle(const Vec3& axis, double angle) {
    const double n = axis.norm();
    const double h = 0.5 * angle;
    const double s = std::sin(h) / n;
    return {std::cos(h), axis.x * s, axis.y * s, axis.z * s};
  }

  // Rotation by `angle` radians about the vertical (+Z) axis.
  static Quat about_z(double angle) {
    return {std::cos(0.5 * angle), 0.0, 0.0, std::sin(0.5 * angle)};
  }

  constexpr Quat operator*(const Quat& o) const {
    return {w * o.w - x * o.x - y * o.y - z * o.z,
            w * o.x + x * o.w + y * o.z - z * o.y,
            w * o.y - x * o.z + y * o.w + z * o.x,
            w * o.z + x * o.y - y * o.x + z * o.w};
  }
  constexpr Quat operator-() const { return {-w, -x, -y, -z}; }
  constexpr bool operator==(const Quat&) const = default;

  constexpr double dot(const Quat& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
  constexpr Quat conjugate() const { return {w, -x, -y, -z}; }

  Quat normalized() const {
    const double n = norm();
    return {w / n, x / n, y / n, z / n};
  }

  // Picks the representative with w >= 0 (left unchanged when |w| <= 1e-9).
  constexpr Quat canonical() const {
    if (w < 0.0 && -w > 1e-9) return -*this;
    return *this;
  }

  Vec3 rotate(const Vec3& v) const {
    // v' = v + 2 u x (u x v + w v), u = (x, y, z)
    const Vec3 u{x, y, z};
    const Vec3 t = u.cross(v) * 2.0;
    return v + t * w + u.cross(t);
  }

  // Rotation angle in [0, pi].
  double angle() const {
    const double s = Vec3{x, y, z}.norm();
    return 2.0 * std::atan2(s, std::abs(w));
  }

  bool is_finite() const {
    return std::isfinite(w) && std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
};

// Angle of the relative rotation between a and b, in [0, pi].
inline double angle_between(const Quat& a, const Quat& b) {
  return (a.conjugate() * b).angle();
}

}  // namespace cmib::geom
