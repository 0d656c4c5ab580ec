#pragma once

#include <cmath>
#include <numbers>

namespace poci {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3 operator-() const { return {-x, -y, -z}; }
  constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline bool is_finite(const Vec3& v) {
  return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

constexpr double pi = std::numbers::pi;

/// Wraps an angle into [-pi, pi).
inline double wrap_angle(double a) {
  double r = std::fmod(a + pi, 2.0 * pi);
  if (r < 0.0) r += 2.0 * pi;
  r -= pi;
  // fmod rounding can land exactly on +pi
  if (r >= pi) r = -pi;
  return r;
}

/// Rotation about the world up-axis (+Y). Maps local coordinates to world.
struct YawRotation {
  double c = 1.0;
  double s = 0.0;

  explicit YawRotation(double yaw) : c(std::cos(yaw)), s(std::sin(yaw)) {}

  Vec3 apply(const Vec3& v) const { return {c * v.x + s * v.z, v.y, -s * v.x + c * v.z}; }
  Vec3 inverse(const Vec3& v) const { return {c * v.x - s * v.z, v.y, s * v.x + c * v.z}; }
};

}  // namespace poci
