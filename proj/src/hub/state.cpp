#include "fabwatch/hub/state.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include <fmt/format.h>

namespace fabwatch::hub {

std::string_view to_string(HubErrorCode c) noexcept {
  switch (c) {
    case HubErrorCode::invalid_tile: return "invalid_tile";
    case HubErrorCode::invalid_payload: return "invalid_payload";
    case HubErrorCode::peer_unreachable: return "peer_unreachable";
    case HubErrorCode::duplicate_peer: return "duplicate_peer";
    case HubErrorCode::protocol: return "protocol";
  }
  return "?";
}

bool WallConfig::is_valid() const noexcept {
  return columns >= 1 && rows >= 1 && tile_width_px >= 1 && tile_height_px >= 1;
}

Viewport viewport_for(const WallConfig& wall, const TileAssignment& tile) {
  if (!wall.is_valid()) {
    throw HubError(HubErrorCode::invalid_tile, fmt::format("invalid wall {}x{} of {}x{} px tiles", wall.columns,
                                                           wall.rows, wall.tile_width_px, wall.tile_height_px));
  }
  if (tile.column >= wall.columns || tile.row >= wall.rows) {
    throw HubError(HubErrorCode::invalid_tile, fmt::format("tile ({},{}) outside {}x{} wall", tile.column, tile.row,
                                                           wall.columns, wall.rows));
  }
  return {std::uint64_t{tile.column} * wall.tile_width_px, std::uint64_t{tile.row} * wall.tile_height_px,
          wall.tile_width_px, wall.tile_height_px};
}

Point3 Camera::eye() const {
  const double cp = std::cos(pitch);
  return target + Point3{cp * std::cos(yaw), cp * std::sin(yaw), std::sin(pitch)} * distance;
}

Point3 Camera::right() const { return Point3{-std::sin(yaw), std::cos(yaw), 0}; }

Point3 Camera::up() const {
  // Forward points from the eye to the target.
  const double cp = std::cos(pitch);
  const Point3 forward{-cp * std::cos(yaw), -cp * std::sin(yaw), -std::sin(pitch)};
  return spatial::cross(right(), forward);
}

std::string_view kind_name(const Payload& p) noexcept {
  static constexpr std::string_view names[] = {"orbit", "pan", "zoom", "set_box", "status_update"};
  return names[p.index()];
}

bool canonical_less(const Interaction& a, const Interaction& b) noexcept {
  if (a.origin_seq != b.origin_seq) return a.origin_seq < b.origin_seq;
  return a.origin_hub < b.origin_hub;
}

namespace {

[[noreturn]] void bad(const std::string& what) { throw HubError(HubErrorCode::invalid_payload, what); }

}  // namespace

void validate_payload(const Payload& p) {
  std::visit(
      [](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Orbit>) {
          if (!std::isfinite(v.d_yaw) || !std::isfinite(v.d_pitch)) bad("orbit deltas must be finite");
        } else if constexpr (std::is_same_v<T, Pan>) {
          if (!std::isfinite(v.dx) || !std::isfinite(v.dy)) bad("pan deltas must be finite");
        } else if constexpr (std::is_same_v<T, Zoom>) {
          if (!std::isfinite(v.factor) || v.factor <= 0) bad(fmt::format("zoom factor {} must be > 0", v.factor));
        } else if constexpr (std::is_same_v<T, SetBox>) {
          if (!v.box.is_valid()) bad(fmt::format("measuring box {} is not valid", spatial::to_string(v.box)));
        } else {
          if (v.event.rule_id.empty()) bad("status update without rule id");
        }
      },
      p);
}

void apply(HubState& s, const Payload& p) {
  auto& cam = s.camera;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Orbit>) {
          constexpr double limit = std::numbers::pi / 2 - kPitchEpsilon;
          cam.yaw = std::remainder(cam.yaw + v.d_yaw, 2 * std::numbers::pi);
          cam.pitch = std::clamp(cam.pitch + v.d_pitch, -limit, limit);
        } else if constexpr (std::is_same_v<T, Pan>) {
          cam.target = cam.target + cam.right() * v.dx + cam.up() * v.dy;
        } else if constexpr (std::is_same_v<T, Zoom>) {
          cam.distance = std::clamp(cam.distance * v.factor, kMinDistance, kMaxDistance);
        } else if constexpr (std::is_same_v<T, SetBox>) {
          s.measuring_box = v.box;
        } else {
          s.status[v.event.rule_id] = v.event;
        }
      },
      p);
  ++s.version;
}

HubState reconcile(const HubState& base, const std::vector<Interaction>& local,
                   const std::vector<Interaction>& remote) {
  std::vector<Interaction> all;
  std::set<std::pair<std::string, std::uint64_t>> seen;
  for (const auto* log : {&local, &remote}) {
    for (const auto& i : *log) {
      if (seen.emplace(i.origin_hub, i.origin_seq).second) all.push_back(i);
    }
  }
  std::sort(all.begin(), all.end(), canonical_less);
  HubState s = base;
  for (const auto& i : all) hub::apply(s, i.payload);
  return s;
}

}  // namespace fabwatch::hub
