#include "fabwatch/spatial/model.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace fabwatch::spatial {

bool is_valid_identifier(std::string_view s) noexcept {
  if (s.empty()) return false;
  return std::none_of(s.begin(), s.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
  });
}

InvalidIdentifier::InvalidIdentifier(std::string_view value)
    : std::invalid_argument(fmt::format("invalid identifier '{}': must be non-empty without whitespace", value)) {}

const Box3* SpatialModel::zone(const ComponentId& c) const {
  auto it = zones.find(c);
  return it == zones.end() ? nullptr : &it->second;
}

const Point3* SpatialModel::anchor(const ComponentId& c) const {
  auto it = anchors.find(c);
  return it == anchors.end() ? nullptr : &it->second;
}

const ComponentId* SpatialModel::component_of(const SensorId& s) const {
  auto it = sensor_bindings.find(s);
  return it == sensor_bindings.end() ? nullptr : &it->second;
}

std::string_view to_string(ModelRule rule) noexcept {
  switch (rule) {
    case ModelRule::invalid_zone: return "invalid-zone";
    case ModelRule::anchor_without_zone: return "anchor-without-zone";
    case ModelRule::anchor_outside_zone: return "anchor-outside-zone";
    case ModelRule::anchor_not_finite: return "anchor-not-finite";
    case ModelRule::unbound_component: return "unbound-component";
  }
  return "unknown";
}

std::vector<Violation> validate_model(const SpatialModel& m) {
  std::vector<Violation> out;

  for (const auto& [id, box] : m.zones) {
    if (!box.is_valid()) {
      out.push_back({id.str(), ModelRule::invalid_zone,
                     fmt::format("zone of '{}' is not a valid box: {}", id.str(), to_string(box))});
    }
  }

  for (const auto& [id, p] : m.anchors) {
    if (!p.is_finite()) {
      out.push_back({id.str(), ModelRule::anchor_not_finite,
                     fmt::format("anchor of '{}' has non-finite coordinates", id.str())});
      continue;
    }
    const Box3* z = m.zone(id);
    if (z == nullptr) {
      out.push_back({id.str(), ModelRule::anchor_without_zone,
                     fmt::format("anchor declared for '{}' which has no zone", id.str())});
    } else if (!contains(*z, p)) {
      out.push_back({id.str(), ModelRule::anchor_outside_zone,
                     fmt::format("anchor {} of '{}' lies outside its zone {}", to_string(p), id.str(),
                                 to_string(*z))});
    }
  }

  for (const auto& [sensor, component] : m.sensor_bindings) {
    if (m.zone(component) == nullptr) {
      out.push_back({sensor.str(), ModelRule::unbound_component,
                     fmt::format("sensor '{}' is bound to undeclared component '{}'", sensor.str(),
                                 component.str())});
    }
  }
  return out;
}

}  // namespace fabwatch::spatial
