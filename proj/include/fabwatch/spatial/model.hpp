#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fabwatch/spatial/geometry.hpp"
#include "fabwatch/spatial/ids.hpp"

namespace fabwatch::spatial {

// Maps factory components to zones and anchor points, and sensors to the component they observe.
struct SpatialModel {
  std::map<ComponentId, Box3> zones;
  std::map<ComponentId, Point3> anchors;
  std::map<SensorId, ComponentId> sensor_bindings;

  [[nodiscard]] const Box3* zone(const ComponentId& c) const;
  [[nodiscard]] const Point3* anchor(const ComponentId& c) const;
  [[nodiscard]] const ComponentId* component_of(const SensorId& s) const;

  friend bool operator==(const SpatialModel&, const SpatialModel&) = default;
};

enum class ModelRule {
  invalid_zone,          // zone box malformed or non-finite
  anchor_without_zone,   // anchor names a component with no zone
  anchor_outside_zone,   // anchor not contained by its component's zone
  anchor_not_finite,
  unbound_component,     // sensor bound to undeclared component
};

struct Violation {
  std::string id;  // offending component or sensor id
  ModelRule rule;
  std::string message;

  friend bool operator==(const Violation&, const Violation&) = default;
};

std::string_view to_string(ModelRule rule) noexcept;

// Empty result iff every SpatialModel invariant holds.
[[nodiscard]] std::vector<Violation> validate_model(const SpatialModel& m);

}  // namespace fabwatch::spatial
