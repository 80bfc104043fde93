#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "fabwatch/analysis/rule.hpp"
#include "fabwatch/spatial/geometry.hpp"

namespace fabwatch::hub {

using analysis::StatusEvent;
using spatial::Box3;
using spatial::Point3;

enum class HubErrorCode { invalid_tile, invalid_payload, peer_unreachable, duplicate_peer, protocol };

std::string_view to_string(HubErrorCode c) noexcept;

class HubError : public std::runtime_error {
 public:
  HubError(HubErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  [[nodiscard]] HubErrorCode code() const noexcept { return code_; }

 private:
  HubErrorCode code_;
};

struct WallConfig {
  std::uint32_t columns = 1;
  std::uint32_t rows = 1;
  std::uint32_t tile_width_px = 1920;
  std::uint32_t tile_height_px = 1080;

  [[nodiscard]] bool is_valid() const noexcept;
  [[nodiscard]] std::uint64_t canvas_width() const noexcept { return std::uint64_t{columns} * tile_width_px; }
  [[nodiscard]] std::uint64_t canvas_height() const noexcept { return std::uint64_t{rows} * tile_height_px; }

  friend bool operator==(const WallConfig&, const WallConfig&) = default;
};

struct TileAssignment {
  std::string client_id;
  std::uint32_t column = 0;
  std::uint32_t row = 0;

  friend bool operator==(const TileAssignment&, const TileAssignment&) = default;
};

// Pixel rectangle within the wall's global canvas.
struct Viewport {
  std::uint64_t x = 0;
  std::uint64_t y = 0;
  std::uint64_t width = 0;
  std::uint64_t height = 0;

  friend bool operator==(const Viewport&, const Viewport&) = default;
};

// Throws HubError{invalid_tile}.
Viewport viewport_for(const WallConfig& wall, const TileAssignment& tile);

inline constexpr double kPitchEpsilon = 1e-3;
inline constexpr double kMinDistance = 1e-6;
inline constexpr double kMaxDistance = 1e6;

// Orbit camera around `target`; z is up, yaw measured from +x.
struct Camera {
  Point3 target{0, 0, 0};
  double yaw = 0;
  double pitch = 0;
  double distance = 1;

  [[nodiscard]] Point3 eye() const;
  [[nodiscard]] Point3 right() const;
  [[nodiscard]] Point3 up() const;

  friend bool operator==(const Camera&, const Camera&) = default;
};

struct HubState {
  std::uint64_t version = 0;
  Camera camera;
  Box3 measuring_box{{0, 0, 0}, {1, 1, 1}};
  std::map<std::string, StatusEvent> status;  // by rule id

  friend bool operator==(const HubState&, const HubState&) = default;
};

struct Orbit {
  double d_yaw = 0;
  double d_pitch = 0;
  friend bool operator==(const Orbit&, const Orbit&) = default;
};
// Translation in the camera's right/up plane, in meters.
struct Pan {
  double dx = 0;
  double dy = 0;
  friend bool operator==(const Pan&, const Pan&) = default;
};
struct Zoom {
  double factor = 1;
  friend bool operator==(const Zoom&, const Zoom&) = default;
};
struct SetBox {
  Box3 box;
  friend bool operator==(const SetBox&, const SetBox&) = default;
};
struct StatusUpdate {
  StatusEvent event;
  friend bool operator==(const StatusUpdate&, const StatusUpdate&) = default;
};

using Payload = std::variant<Orbit, Pan, Zoom, SetBox, StatusUpdate>;

std::string_view kind_name(const Payload& p) noexcept;

struct Interaction {
  std::string origin_hub;
  std::uint64_t origin_seq = 0;
  Payload payload;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

// Canonical total order: origin sequence, then origin hub id.
bool canonical_less(const Interaction& a, const Interaction& b) noexcept;

// Throws HubError{invalid_payload}.
void validate_payload(const Payload& p);

// Applies one interaction and bumps the version by one. Payload must be valid.
void apply(HubState& s, const Payload& p);

// Union of both logs (duplicate tags dropped), applied to `base` in canonical order.
HubState reconcile(const HubState& base, const std::vector<Interaction>& local,
                   const std::vector<Interaction>& remote);

}  // namespace fabwatch::hub
