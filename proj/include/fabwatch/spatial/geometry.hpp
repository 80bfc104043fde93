#pragma once

#include <cmath>
#include <string>

namespace fabwatch::spatial {

// Factory frame: meters, right-handed, +z up.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  [[nodiscard]] bool is_finite() const noexcept {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }

  friend bool operator==(const Point3&, const Point3&) = default;
};

Point3 operator+(const Point3& a, const Point3& b) noexcept;
Point3 operator-(const Point3& a, const Point3& b) noexcept;
Point3 operator*(const Point3& a, double s) noexcept;
double dot(const Point3& a, const Point3& b) noexcept;
Point3 cross(const Point3& a, const Point3& b) noexcept;
double norm(const Point3& a) noexcept;
Point3 normalized(const Point3& a) noexcept;

// Axis-aligned, closed on every face. Zero-extent boxes are allowed.
struct Box3 {
  Point3 min;
  Point3 max;

  [[nodiscard]] bool is_valid() const noexcept {
    return min.is_finite() && max.is_finite() && min.x <= max.x && min.y <= max.y &&
           min.z <= max.z;
  }

  [[nodiscard]] Point3 center() const noexcept {
    return {(min.x + max.x) * 0.5, (min.y + max.y) * 0.5, (min.z + max.z) * 0.5};
  }

  friend bool operator==(const Box3&, const Box3&) = default;
};

[[nodiscard]] bool contains(const Box3& box, const Point3& p) noexcept;

// True iff `inner` lies entirely within `outer` (component-wise).
[[nodiscard]] bool encloses(const Box3& outer, const Box3& inner) noexcept;

std::string to_string(const Point3& p);
std::string to_string(const Box3& b);

}  // namespace fabwatch::spatial
