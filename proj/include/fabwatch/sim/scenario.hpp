#pragma once

#include <cstdint>
#include <vector>

#include "fabwatch/analysis/rule.hpp"
#include "fabwatch/sim/simulator.hpp"

namespace fabwatch::sim {

// Stock layout of the cap-transfer stage: cap_stack, gripper, conveyor and staging_area zones,
// with stack_count, pick_actuated and staging_occupied bound to them.
spatial::SpatialModel cap_transfer_model();

// "stack_empty" (warning): stack_count <= 0 sustained for 2 s.
// "cap_missing" (fault): pick_actuated = true not followed by staging_occupied = true within 500 ms.
std::vector<analysis::Rule> cap_transfer_rules();

struct Scenario {
  std::uint32_t stack_capacity = 10;
  std::uint64_t cycles = 20;
  std::uint64_t seed = 1;
  FailurePlan plan;
  std::uint64_t frame_every = 5;
  std::size_t conveyor_slots = kDefaultConveyorSlots;
  Intrinsics intrinsics{320, 240, 260, 260, 160, 120};

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

}  // namespace fabwatch::sim
