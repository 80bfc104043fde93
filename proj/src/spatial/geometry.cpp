#include "fabwatch/spatial/geometry.hpp"

#include <fmt/format.h>

namespace fabwatch::spatial {

Point3 operator+(const Point3& a, const Point3& b) noexcept { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
Point3 operator-(const Point3& a, const Point3& b) noexcept { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
Point3 operator*(const Point3& a, double s) noexcept { return {a.x * s, a.y * s, a.z * s}; }

double dot(const Point3& a, const Point3& b) noexcept { return a.x * b.x + a.y * b.y + a.z * b.z; }

Point3 cross(const Point3& a, const Point3& b) noexcept {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

double norm(const Point3& a) noexcept { return std::sqrt(dot(a, a)); }

Point3 normalized(const Point3& a) noexcept {
  const double n = norm(a);
  return n > 0.0 ? a * (1.0 / n) : a;
}

bool contains(const Box3& box, const Point3& p) noexcept {
  return box.min.x <= p.x && p.x <= box.max.x && box.min.y <= p.y && p.y <= box.max.y &&
         box.min.z <= p.z && p.z <= box.max.z;
}

bool encloses(const Box3& outer, const Box3& inner) noexcept {
  return contains(outer, inner.min) && contains(outer, inner.max);
}

std::string to_string(const Point3& p) { return fmt::format("({}, {}, {})", p.x, p.y, p.z); }

std::string to_string(const Box3& b) {
  return fmt::format("[{}-{}]", to_string(b.min), to_string(b.max));
}

}  // namespace fabwatch::spatial
