#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fabwatch/spatial/geometry.hpp"

namespace fabwatch::pointcloud {

using spatial::Box3;
using spatial::Point3;

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct PointCloudFrame {
  std::uint64_t frame_id = 0;
  std::uint64_t timestamp_ms = 0;
  std::vector<Point3> points;
  std::optional<std::vector<Rgb>> colors;  // same length as points when present

  [[nodiscard]] bool is_valid() const noexcept;

  friend bool operator==(const PointCloudFrame&, const PointCloudFrame&) = default;
};

/// Row-major depth raster with pinhole intrinsics. A depth of 0 means "no return".
struct DepthImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<double> depths;
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  [[nodiscard]] bool is_valid() const noexcept;
  [[nodiscard]] double at(std::uint32_t u, std::uint32_t v) const { return depths[std::size_t{v} * width + u]; }

  friend bool operator==(const DepthImage&, const DepthImage&) = default;
};

// Raised by decoders on malformed input. `offset` is a byte offset into the input when known.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what, std::optional<std::size_t> offset = std::nullopt);
  [[nodiscard]] std::optional<std::size_t> offset() const noexcept { return offset_; }

 private:
  std::optional<std::size_t> offset_;
};

// Pinhole back-projection; zero-depth pixels are skipped and output is row-major.
[[nodiscard]] PointCloudFrame depth_to_cloud(const DepthImage& img, std::uint64_t frame_id = 0,
                                             std::uint64_t timestamp_ms = 0);

/// Assigns a blue-to-red gradient by min-max normalized z.
/// r = round(255 t), g = 0, b = round(255 (1 - t)), rounding half up; t = 0 for all points when
/// every z is equal. Points are left untouched.
[[nodiscard]] PointCloudFrame color_by_depth(PointCloudFrame frame);

[[nodiscard]] std::size_t count_in_box(const PointCloudFrame& frame, const Box3& box) noexcept;

// Tight axis-aligned bounds; nullopt for an empty frame.
[[nodiscard]] std::optional<Box3> bounding_box(const PointCloudFrame& frame) noexcept;

}  // namespace fabwatch::pointcloud
