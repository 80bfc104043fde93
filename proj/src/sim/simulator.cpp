#include "fabwatch/sim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

namespace fabwatch::sim {

bool CapStageState::is_valid() const noexcept {
  return stack_count <= stack_capacity && !conveyor_slots.empty();
}

CapStageState initial_state(std::uint32_t stack_capacity, std::uint64_t seed, std::uint64_t start_ms,
                            std::size_t conveyor_slots) {
  if (conveyor_slots == 0) throw std::invalid_argument("conveyor needs at least one slot");
  CapStageState s;
  s.stack_capacity = stack_capacity;
  s.stack_count = stack_capacity;
  s.conveyor_slots.assign(conveyor_slots, false);
  s.clock_ms = start_ms;
  s.seed = seed;
  s.rng.seed(seed);
  return s;
}

FailurePlan FailurePlan::probabilistic(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(fmt::format("failure probability {} not in [0, 1]", p));
  return {Mode::probabilistic, p, {}};
}

namespace {

bool grip_fails(CapStageState& s, const FailurePlan& plan) {
  switch (plan.mode) {
    case FailurePlan::Mode::none: return false;
    case FailurePlan::Mode::scripted: return plan.cycles.contains(s.cycle);
    case FailurePlan::Mode::probabilistic:
      ++s.rng_draws;
      return unit_double(s.rng()) < plan.p;
  }
  return false;
}

SensorReading reading(CapStageState& s, const std::string& producer, const spatial::SensorId& sensor,
                      ingestion::Value v, std::uint64_t ts) {
  return {spatial::ProducerId(producer), s.next_seq++, sensor, v, ts};
}

}  // namespace

StepResult step(const CapStageState& s, const FailurePlan& plan, const std::string& producer) {
  StepResult r;
  CapStageState n = s;
  const std::uint64_t t0 = s.clock_ms;

  n.piston = Piston::extended;
  n.gripper = Gripper::idle;
  const bool picked = n.stack_count > 0;
  if (picked) {
    r.failure_injected = grip_fails(n, plan);
    --n.stack_count;
    if (r.failure_injected) {
      n.gripper = Gripper::empty_after_pick;
      ++n.caps_dropped;
    } else {
      n.gripper = Gripper::holding;
    }
  }
  n.piston = Piston::retracted;
  r.readings.push_back(reading(n, producer, kStackCount, static_cast<double>(n.stack_count), t0 + phase::pick));
  r.readings.push_back(reading(n, producer, kPickActuated, picked, t0 + phase::pick));

  if (n.gripper == Gripper::holding) {
    n.conveyor_slots.front() = true;
    n.gripper = Gripper::idle;
  }

  // The belt indexes until a cap reaches the far end.
  auto& slots = n.conveyor_slots;
  while (!slots.back() && std::find(slots.begin(), slots.end(), true) != slots.end()) {
    std::rotate(slots.rbegin(), slots.rbegin() + 1, slots.rend());
  }
  if (slots.back() && !n.staging_occupied) {
    slots.back() = false;
    n.staging_occupied = true;
    ++n.caps_delivered;
  }
  r.readings.push_back(reading(n, producer, kStagingOccupied, n.staging_occupied, t0 + phase::staging));
  r.staged = n;
  r.staged.clock_ms = t0 + phase::staging;

  n.staging_occupied = false;
  ++n.cycle;
  n.clock_ms = t0 + kCycleMs;
  r.state = std::move(n);
  return r;
}

SensorPose SensorPose::look_at(const Point3& eye, const Point3& target, const Point3& world_up) {
  SensorPose p;
  p.position = eye;
  p.forward = spatial::normalized(target - eye);
  p.right = spatial::normalized(spatial::cross(p.forward, world_up));
  p.down = spatial::cross(p.forward, p.right);
  return p;
}

Point3 SensorPose::to_world(const Point3& c) const { return position + right * c.x + down * c.y + forward * c.z; }

std::vector<Box3> SceneTemplate::stack_caps(std::uint32_t count) const {
  const double h = cap_size.z;
  const auto fit = static_cast<std::uint32_t>(std::floor((stack_zone.max.z - stack_zone.min.z) / h + 1e-9));
  const Point3 c = stack_zone.center();
  std::vector<Box3> out;
  for (std::uint32_t i = 0; i < std::min(count, fit); ++i) {
    const double z = stack_zone.min.z + h * i;
    const double top = std::min(z + h, stack_zone.max.z);  // rounding must not poke out of the zone
    out.push_back({{c.x - cap_size.x / 2, c.y - cap_size.y / 2, z}, {c.x + cap_size.x / 2, c.y + cap_size.y / 2, top}});
  }
  return out;
}

Box3 SceneTemplate::slot_cap(std::size_t slot, std::size_t slots) const {
  const double len = (conveyor_zone.max.x - conveyor_zone.min.x) / static_cast<double>(slots);
  const double cx = conveyor_zone.min.x + len * (static_cast<double>(slot) + 0.5);
  const double cy = (conveyor_zone.min.y + conveyor_zone.max.y) / 2;
  const double z = conveyor_zone.min.z;
  return {{cx - cap_size.x / 2, cy - cap_size.y / 2, z}, {cx + cap_size.x / 2, cy + cap_size.y / 2, z + cap_size.z}};
}

Box3 SceneTemplate::staging_cap() const {
  const Point3 c = staging_zone.center();
  const double z = staging_zone.min.z;
  return {{c.x - cap_size.x / 2, c.y - cap_size.y / 2, z}, {c.x + cap_size.x / 2, c.y + cap_size.y / 2, z + cap_size.z}};
}

std::vector<Box3> SceneTemplate::boxes(const CapStageState& s) const {
  std::vector<Box3> out;
  if (draw_zones) {
    for (const auto* z : {&stack_zone, &conveyor_zone, &staging_zone}) {
      out.push_back({{z->min.x, z->min.y, z->min.z - 0.01}, {z->max.x, z->max.y, z->min.z}});
    }
  }
  for (const auto& b : stack_caps(s.stack_count)) out.push_back(b);
  for (std::size_t i = 0; i < s.conveyor_slots.size(); ++i) {
    if (s.conveyor_slots[i]) out.push_back(slot_cap(i, s.conveyor_slots.size()));
  }
  if (s.staging_occupied) out.push_back(staging_cap());
  return out;
}

SceneTemplate template_from_model(const spatial::SpatialModel& model) {
  auto zone = [&](const char* name) {
    const auto* z = model.zone(spatial::ComponentId(name));
    if (!z) throw std::invalid_argument(fmt::format("spatial model has no zone for '{}'", name));
    return *z;
  };
  SceneTemplate t;
  t.stack_zone = zone("cap_stack");
  t.conveyor_zone = zone("conveyor");
  t.staging_zone = zone("staging_area");
  const Point3 target = (t.stack_zone.center() + t.staging_zone.center()) * 0.5;
  t.pose = SensorPose::look_at(target + Point3{0, -0.45, 0.5}, target);
  t.intrinsics = {320, 240, 260, 260, 160, 120};
  return t;
}

std::optional<double> intersect(const Point3& origin, const Point3& dir, const Box3& box) noexcept {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  const double o[3] = {origin.x, origin.y, origin.z};
  const double d[3] = {dir.x, dir.y, dir.z};
  const double lo[3] = {box.min.x, box.min.y, box.min.z};
  const double hi[3] = {box.max.x, box.max.y, box.max.z};
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < lo[a] || o[a] > hi[a]) return std::nullopt;
      continue;
    }
    double t1 = (lo[a] - o[a]) / d[a];
    double t2 = (hi[a] - o[a]) / d[a];
    if (t1 > t2) std::swap(t1, t2);
    t_near = std::max(t_near, t1);
    t_far = std::min(t_far, t2);
  }
  if (t_near > t_far || t_near <= 0.0) return std::nullopt;
  return t_near;
}

pointcloud::DepthImage render_depth(const std::vector<Box3>& boxes, const SensorPose& pose, const Intrinsics& k) {
  pointcloud::DepthImage img;
  img.width = k.width;
  img.height = k.height;
  img.fx = k.fx;
  img.fy = k.fy;
  img.cx = k.cx;
  img.cy = k.cy;
  img.depths.assign(std::size_t{k.width} * k.height, 0.0);
  if (boxes.empty()) return img;
  for (std::uint32_t v = 0; v < k.height; ++v) {
    for (std::uint32_t u = 0; u < k.width; ++u) {
      // Forward component is 1, so the ray parameter is the z-depth.
      const Point3 dir = pose.right * ((u - k.cx) / k.fx) + pose.down * ((v - k.cy) / k.fy) + pose.forward;
      double best = 0.0;
      for (const auto& b : boxes) {
        if (auto t = intersect(pose.position, dir, b); t && (best == 0.0 || *t < best)) best = *t;
      }
      img.depths[std::size_t{v} * k.width + u] = best;
    }
  }
  return img;
}

pointcloud::DepthImage render_depth(const CapStageState& s, const SceneTemplate& t) {
  return render_depth(t.boxes(s), t.pose, t.intrinsics);
}

pointcloud::PointCloudFrame to_factory_frame(const pointcloud::DepthImage& img, const SensorPose& pose,
                                             std::uint64_t frame_id, std::uint64_t timestamp_ms) {
  auto f = pointcloud::depth_to_cloud(img, frame_id, timestamp_ms);
  for (auto& p : f.points) p = pose.to_world(p);
  return f;
}

RunSummary run(CapStageState& state, std::uint64_t cycles, const FailurePlan& plan, const SceneTemplate& scene,
               const RunSinks& sinks, const RunOptions& opts) {
  RunSummary sum;
  try {
    for (std::uint64_t i = 0; i < cycles; ++i) {
      auto r = step(state, plan, opts.producer);
      state = r.state;
      if (r.failure_injected) ++sum.failures_injected;
      for (const auto& rd : r.readings) {
        if (sinks.reading) sinks.reading(rd);
        ++sum.readings_published;
      }
      if (opts.frame_every > 0 && (i + 1) % opts.frame_every == 0) {
        const auto frame = to_factory_frame(render_depth(r.staged, scene), scene.pose, sum.frames_broadcast + 1,
                                            r.staged.clock_ms);
        if (sinks.frame) sinks.frame(frame);
        ++sum.frames_broadcast;
      }
      ++sum.cycles;
    }
  } catch (const std::exception& e) {
    sum.aborted = true;
    sum.error = e.what();
  }
  sum.caps_delivered = state.caps_delivered;
  sum.caps_dropped = state.caps_dropped;
  sum.stack_remaining = state.stack_count;
  sum.end_clock_ms = state.clock_ms;
  return sum;
}

}  // namespace fabwatch::sim
