#include "fabwatch/pointcloud/frame.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace fabwatch::pointcloud {

namespace {

std::uint8_t round_half_up_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

}  // namespace

FormatError::FormatError(const std::string& what, std::optional<std::size_t> offset)
    : std::runtime_error(offset ? fmt::format("{} (at byte {})", what, *offset) : what), offset_(offset) {}

bool PointCloudFrame::is_valid() const noexcept {
  if (colors && colors->size() != points.size()) return false;
  return std::all_of(points.begin(), points.end(), [](const Point3& p) { return p.is_finite(); });
}

bool DepthImage::is_valid() const noexcept {
  if (width == 0 || height == 0) return false;
  if (depths.size() != std::size_t{width} * height) return false;
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) return false;
  if (!std::isfinite(cx) || !std::isfinite(cy)) return false;
  return std::all_of(depths.begin(), depths.end(), [](double d) { return std::isfinite(d) && d >= 0.0; });
}

PointCloudFrame depth_to_cloud(const DepthImage& img, std::uint64_t frame_id, std::uint64_t timestamp_ms) {
  PointCloudFrame out;
  out.frame_id = frame_id;
  out.timestamp_ms = timestamp_ms;
  out.points.reserve(img.depths.size());
  for (std::uint32_t v = 0; v < img.height; ++v) {
    for (std::uint32_t u = 0; u < img.width; ++u) {
      const double d = img.at(u, v);
      if (d <= 0.0) continue;
      out.points.push_back({(static_cast<double>(u) - img.cx) * d / img.fx,
                            (static_cast<double>(v) - img.cy) * d / img.fy, d});
    }
  }
  return out;
}

PointCloudFrame color_by_depth(PointCloudFrame frame) {
  std::vector<Rgb> colors(frame.points.size());
  if (!frame.points.empty()) {
    const auto [lo, hi] = std::minmax_element(frame.points.begin(), frame.points.end(),
                                              [](const Point3& a, const Point3& b) { return a.z < b.z; });
    const double zmin = lo->z;
    const double span = hi->z - zmin;
    for (std::size_t i = 0; i < frame.points.size(); ++i) {
      const double t = span > 0.0 ? (frame.points[i].z - zmin) / span : 0.0;
      colors[i] = {round_half_up_byte(255.0 * t), 0, round_half_up_byte(255.0 * (1.0 - t))};
    }
  }
  frame.colors = std::move(colors);
  return frame;
}

std::size_t count_in_box(const PointCloudFrame& frame, const Box3& box) noexcept {
  return static_cast<std::size_t>(std::count_if(frame.points.begin(), frame.points.end(),
                                                 [&](const Point3& p) { return spatial::contains(box, p); }));
}

std::optional<Box3> bounding_box(const PointCloudFrame& frame) noexcept {
  if (frame.points.empty()) return std::nullopt;
  Box3 b{frame.points.front(), frame.points.front()};
  for (const auto& p : frame.points) {
    b.min = {std::min(b.min.x, p.x), std::min(b.min.y, p.y), std::min(b.min.z, p.z)};
    b.max = {std::max(b.max.x, p.x), std::max(b.max.y, p.y), std::max(b.max.z, p.z)};
  }
  return b;
}

}  // namespace fabwatch::pointcloud
