#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fabwatch/ingestion/reading.hpp"
#include "fabwatch/pointcloud/frame.hpp"
#include "fabwatch/spatial/model.hpp"

namespace fabwatch::sim {

using ingestion::SensorReading;
using spatial::Box3;
using spatial::Point3;

inline constexpr std::uint64_t kCycleMs = 1000;
inline constexpr std::size_t kDefaultConveyorSlots = 4;

// Offsets of each phase within a cycle.
namespace phase {
inline constexpr std::uint64_t piston = 0;
inline constexpr std::uint64_t pick = 100;
inline constexpr std::uint64_t place = 200;
inline constexpr std::uint64_t conveyor = 300;
inline constexpr std::uint64_t staging = 400;
inline constexpr std::uint64_t staging_clear = 800;
}  // namespace phase

inline const spatial::SensorId kStackCount{"stack_count"};
inline const spatial::SensorId kPickActuated{"pick_actuated"};
inline const spatial::SensorId kStagingOccupied{"staging_occupied"};

enum class Piston { retracted, extended };
enum class Gripper { idle, holding, empty_after_pick };

// Uniform double in [0, 1) from the top 53 bits of one 64-bit draw.
inline double unit_double(std::uint64_t x) noexcept { return static_cast<double>(x >> 11) * 0x1.0p-53; }

struct CapStageState {
  std::uint32_t stack_capacity = 10;
  std::uint32_t stack_count = 10;
  Piston piston = Piston::retracted;
  Gripper gripper = Gripper::idle;
  std::vector<bool> conveyor_slots = std::vector<bool>(kDefaultConveyorSlots, false);
  bool staging_occupied = false;
  std::uint64_t clock_ms = 0;  // start of the next cycle
  std::uint64_t cycle = 0;     // index of the next cycle

  std::uint64_t seed = 0;
  std::mt19937_64 rng{0};
  std::uint64_t rng_draws = 0;

  std::uint64_t next_seq = 1;
  std::uint64_t caps_delivered = 0;
  std::uint64_t caps_dropped = 0;

  [[nodiscard]] bool is_valid() const noexcept;

  friend bool operator==(const CapStageState&, const CapStageState&) = default;
};

CapStageState initial_state(std::uint32_t stack_capacity, std::uint64_t seed, std::uint64_t start_ms = 0,
                            std::size_t conveyor_slots = kDefaultConveyorSlots);

struct FailurePlan {
  enum class Mode { none, probabilistic, scripted };
  Mode mode = Mode::none;
  double p = 0;
  std::set<std::uint64_t> cycles;

  static FailurePlan none() { return {}; }
  static FailurePlan probabilistic(double p);  // throws std::invalid_argument unless 0 <= p <= 1
  static FailurePlan scripted(std::set<std::uint64_t> cycles) { return {Mode::scripted, 0, std::move(cycles)}; }

  friend bool operator==(const FailurePlan&, const FailurePlan&) = default;
};

struct StepResult {
  CapStageState state;                // after the whole cycle
  CapStageState staged;               // just after transfer-to-staging, before staging clears
  std::vector<SensorReading> readings;  // stack_count, pick_actuated, staging_occupied
  bool failure_injected = false;
};

/// One machine cycle: piston-extend, pick, place on conveyor, conveyor shift, transfer to
/// staging, staging clear. A grip failure consumes the cap without it reaching the conveyor.
/// With an empty stack the piston still extends but nothing is picked.
StepResult step(const CapStageState& s, const FailurePlan& plan, const std::string& producer = "festo-sim");

// z forward, x right, y down, as in the depth back-projection.
struct SensorPose {
  Point3 position{0, 0, 1};
  Point3 right{1, 0, 0};
  Point3 down{0, -1, 0};
  Point3 forward{0, 0, -1};

  static SensorPose look_at(const Point3& eye, const Point3& target, const Point3& world_up = {0, 0, 1});

  [[nodiscard]] Point3 to_world(const Point3& camera_point) const;
};

struct Intrinsics {
  std::uint32_t width = 320;
  std::uint32_t height = 240;
  double fx = 300;
  double fy = 300;
  double cx = 160;
  double cy = 120;

  friend bool operator==(const Intrinsics&, const Intrinsics&) = default;
};

struct SceneTemplate {
  Box3 stack_zone;
  Box3 conveyor_zone;
  Box3 staging_zone;
  Point3 cap_size{0.04, 0.04, 0.02};
  SensorPose pose;
  Intrinsics intrinsics;
  bool draw_zones = true;  // zones as thin floor slabs

  // Stacked caps bottom-up, at most as many as fit in the stack zone.
  [[nodiscard]] std::vector<Box3> stack_caps(std::uint32_t count) const;
  [[nodiscard]] Box3 slot_cap(std::size_t slot, std::size_t slots) const;
  [[nodiscard]] Box3 staging_cap() const;
  [[nodiscard]] std::vector<Box3> boxes(const CapStageState& s) const;
};

// Uses the zones of cap_stack, conveyor and staging_area from `model`.
SceneTemplate template_from_model(const spatial::SpatialModel& model);

// Ray/box slab test; distance along `dir` to the first hit in front of `origin`, if any.
std::optional<double> intersect(const Point3& origin, const Point3& dir, const Box3& box) noexcept;

/// Z-depth of the nearest box per pixel (0 when the ray hits nothing).
pointcloud::DepthImage render_depth(const std::vector<Box3>& boxes, const SensorPose& pose, const Intrinsics& k);
pointcloud::DepthImage render_depth(const CapStageState& s, const SceneTemplate& t);

// Back-projects a depth image into factory coordinates.
pointcloud::PointCloudFrame to_factory_frame(const pointcloud::DepthImage& img, const SensorPose& pose,
                                             std::uint64_t frame_id, std::uint64_t timestamp_ms);

struct RunSinks {
  std::function<void(const SensorReading&)> reading;
  std::function<void(const pointcloud::PointCloudFrame&)> frame;
};

struct RunOptions {
  std::uint64_t frame_every = 0;  // k; 0 disables frames
  std::string producer = "festo-sim";
};

struct RunSummary {
  std::uint64_t cycles = 0;
  std::uint64_t failures_injected = 0;
  std::uint64_t readings_published = 0;
  std::uint64_t frames_broadcast = 0;
  std::uint64_t caps_delivered = 0;
  std::uint64_t caps_dropped = 0;
  std::uint32_t stack_remaining = 0;
  std::uint64_t end_clock_ms = 0;
  bool aborted = false;
  std::string error;

  friend bool operator==(const RunSummary&, const RunSummary&) = default;
};

/// Runs `cycles` steps from `state`, publishing readings after each step and a depth-derived
/// frame every k-th cycle. A throwing sink stops the run; the partial summary is returned.
RunSummary run(CapStageState& state, std::uint64_t cycles, const FailurePlan& plan, const SceneTemplate& scene,
               const RunSinks& sinks, const RunOptions& opts = {});

}  // namespace fabwatch::sim
