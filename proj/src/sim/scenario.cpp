#include "fabwatch/sim/scenario.hpp"

namespace fabwatch::sim {

using spatial::ComponentId;
using spatial::SensorId;

spatial::SpatialModel cap_transfer_model() {
  spatial::SpatialModel m;
  const ComponentId stack("cap_stack"), gripper("gripper"), conveyor("conveyor"), staging("staging_area");
  m.zones[stack] = {{0.00, 0.00, 0.00}, {0.08, 0.08, 0.30}};
  m.zones[gripper] = {{0.00, 0.10, 0.25}, {0.30, 0.20, 0.40}};
  m.zones[conveyor] = {{0.10, 0.00, 0.00}, {0.50, 0.08, 0.06}};
  m.zones[staging] = {{0.52, 0.00, 0.00}, {0.62, 0.08, 0.06}};
  m.anchors[stack] = {0.04, 0.04, 0.30};
  m.anchors[conveyor] = {0.30, 0.04, 0.06};
  m.anchors[staging] = {0.57, 0.04, 0.06};
  m.sensor_bindings[kStackCount] = stack;
  m.sensor_bindings[kPickActuated] = gripper;
  m.sensor_bindings[kStagingOccupied] = staging;
  return m;
}

std::vector<analysis::Rule> cap_transfer_rules() {
  using namespace analysis;
  return {
      Rule{"cap_missing",
           AbsenceAfterTrigger{{kPickActuated, Comparison::eq, true}, {kStagingOccupied, Comparison::eq, true}, 500},
           Severity::fault, ComponentId("staging_area"), "cap missing at {component}"},
      Rule{"stack_empty", ThresholdSustained{{kStackCount, Comparison::le, 0.0}, 2000}, Severity::warning,
           ComponentId("cap_stack"), "stack empty"},
  };
}

}  // namespace fabwatch::sim
