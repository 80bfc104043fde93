#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fabwatch/analysis/engine.hpp"
#include "fabwatch/ingestion/broker.hpp"
#include "fabwatch/ingestion/dedup.hpp"
#include "fabwatch/pointcloud/codec.hpp"
#include "fabwatch/sim/scenario.hpp"

namespace {

using namespace fabwatch::sim;
using fabwatch::analysis::Condition;
using fabwatch::analysis::Severity;
using fabwatch::spatial::contains;

double real(const SensorReading& r) { return std::get<double>(r.value); }
bool flag(const SensorReading& r) { return std::get<bool>(r.value); }

TEST(Step, FullStackNoFailure) {
  const auto s0 = initial_state(5, 1, 10'000);
  const auto r = step(s0, FailurePlan::none());
  ASSERT_EQ(r.readings.size(), 3u);
  EXPECT_EQ(r.readings[0].sensor, kStackCount);
  EXPECT_EQ(real(r.readings[0]), 4.0);
  EXPECT_EQ(r.readings[0].timestamp_ms, 10'100u);
  EXPECT_EQ(r.readings[1].sensor, kPickActuated);
  EXPECT_TRUE(flag(r.readings[1]));
  EXPECT_EQ(r.readings[1].timestamp_ms, 10'100u);
  EXPECT_EQ(r.readings[2].sensor, kStagingOccupied);
  EXPECT_TRUE(flag(r.readings[2]));
  EXPECT_EQ(r.readings[2].timestamp_ms, 10'400u);
  EXPECT_EQ((std::vector<std::uint64_t>{r.readings[0].seq, r.readings[1].seq, r.readings[2].seq}),
            (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_TRUE(r.staged.staging_occupied);
  EXPECT_FALSE(r.failure_injected);
  EXPECT_FALSE(r.state.staging_occupied);
  EXPECT_EQ(r.state.clock_ms, 11'000u);
  EXPECT_EQ(r.state.cycle, 1u);
  EXPECT_EQ(r.state.caps_delivered, 1u);
  EXPECT_EQ(r.state.gripper, Gripper::idle);
  EXPECT_EQ(r.state.piston, Piston::retracted);
  EXPECT_TRUE(std::none_of(r.state.conveyor_slots.begin(), r.state.conveyor_slots.end(), [](bool b) { return b; }));
}

TEST(Step, ScriptedFailureAtCycleZero) {
  const auto r = step(initial_state(5, 1), FailurePlan::scripted({0}));
  EXPECT_TRUE(r.failure_injected);
  EXPECT_EQ(real(r.readings[0]), 4.0);
  EXPECT_TRUE(flag(r.readings[1]));
  EXPECT_FALSE(flag(r.readings[2]));
  EXPECT_FALSE(r.staged.staging_occupied);
  EXPECT_EQ(r.state.caps_dropped, 1u);
  EXPECT_EQ(r.state.caps_delivered, 0u);
  EXPECT_EQ(r.state.gripper, Gripper::empty_after_pick);
}

TEST(Step, EmptyStack) {
  auto s = initial_state(0, 1);
  const auto r = step(s, FailurePlan::scripted({0}));
  EXPECT_EQ(real(r.readings[0]), 0.0);
  EXPECT_FALSE(flag(r.readings[1]));
  EXPECT_FALSE(flag(r.readings[2]));
  EXPECT_FALSE(r.failure_injected) << "nothing was picked, so nothing could be dropped";
  EXPECT_EQ(r.state.stack_count, 0u);
}

TEST(Step, ProbabilisticUsesDocumentedGenerator) {
  // Independent replay of the draw: first output of mt19937_64 seeded with 99, top 53 bits.
  std::mt19937_64 ref(99);
  const double u = static_cast<double>(ref() >> 11) / 9007199254740992.0;
  const auto r_fail = step(initial_state(3, 99), FailurePlan::probabilistic(std::nextafter(u, 1.0)));
  const auto r_ok = step(initial_state(3, 99), FailurePlan::probabilistic(u));
  EXPECT_TRUE(r_fail.failure_injected);
  EXPECT_FALSE(r_ok.failure_injected);
  EXPECT_EQ(r_ok.state.rng_draws, 1u);
  EXPECT_THROW(FailurePlan::probabilistic(1.5), std::invalid_argument);
  EXPECT_THROW(FailurePlan::probabilistic(NAN), std::invalid_argument);
}

SceneTemplate scene() { return template_from_model(cap_transfer_model()); }

TEST(Run, ZeroCycles) {
  auto s = initial_state(5, 1);
  const auto sum = run(s, 0, FailurePlan::none(), scene(), {});
  EXPECT_EQ(sum.cycles, 0u);
  EXPECT_EQ(sum.failures_injected, 0u);
  EXPECT_EQ(sum.readings_published, 0u);
  EXPECT_EQ(sum.frames_broadcast, 0u);
}

TEST(Run, ScriptedCount) {
  auto s = initial_state(20, 1);
  const auto sum = run(s, 10, FailurePlan::scripted({3}), scene(), {});
  EXPECT_EQ(sum.failures_injected, 1u);
  EXPECT_EQ(sum.readings_published, 30u);
}

TEST(Run, CertainFailureExhaustsStack) {
  auto s = initial_state(5, 1);
  const auto sum = run(s, 5, FailurePlan::probabilistic(1.0), scene(), {});
  EXPECT_EQ(sum.failures_injected, 5u);
  EXPECT_EQ(sum.stack_remaining, 0u);
  EXPECT_EQ(sum.caps_delivered, 0u);
}

TEST(Run, FrameCadenceAndSinkFailure) {
  auto s = initial_state(20, 1);
  std::vector<std::uint64_t> ids, stamps;
  RunSinks sinks;
  sinks.frame = [&](const fabwatch::pointcloud::PointCloudFrame& f) {
    ids.push_back(f.frame_id);
    stamps.push_back(f.timestamp_ms);
  };
  auto sum = run(s, 7, FailurePlan::none(), scene(), sinks, {3});
  EXPECT_EQ(sum.frames_broadcast, 2u);
  EXPECT_EQ(ids, (std::vector<std::uint64_t>{1, 2}));
  EXPECT_EQ(stamps, (std::vector<std::uint64_t>{2400, 5400}));

  auto s2 = initial_state(20, 1);
  int calls = 0;
  sinks.reading = [&](const SensorReading&) {
    if (++calls == 5) throw std::runtime_error("sink down");
  };
  sum = run(s2, 7, FailurePlan::none(), scene(), sinks, {3});
  EXPECT_TRUE(sum.aborted);
  EXPECT_EQ(sum.error, "sink down");
  EXPECT_EQ(sum.cycles, 1u);
  EXPECT_EQ(sum.readings_published, 4u);
}

struct Trace {
  std::vector<SensorReading> readings;
  std::vector<std::vector<std::byte>> frames;
  RunSummary summary;
  bool operator==(const Trace&) const = default;
};

Trace trace(std::uint64_t seed, const FailurePlan& plan, std::uint64_t n) {
  Trace t;
  auto s = initial_state(12, seed);
  RunSinks sinks{[&](const SensorReading& r) { t.readings.push_back(r); },
                 [&](const fabwatch::pointcloud::PointCloudFrame& f) {
                   t.frames.push_back(fabwatch::pointcloud::encode_binary(f));
                 }};
  t.summary = run(s, n, plan, scene(), sinks, {4});
  return t;
}

TEST(SimProperty, Deterministic) {
  for (std::uint64_t seed : {1u, 2u, 77u}) {
    const auto plan = FailurePlan::probabilistic(0.3);
    const auto a = trace(seed, plan, 16);
    EXPECT_EQ(a, trace(seed, plan, 16));
    EXPECT_EQ(a.frames.size(), 4u);
  }
  EXPECT_NE(trace(1, FailurePlan::probabilistic(0.5), 12).readings,
            trace(2, FailurePlan::probabilistic(0.5), 12).readings);
}

TEST(SimProperty, Conservation) {
  std::mt19937_64 rng(3);
  for (int iter = 0; iter < 500; ++iter) {
    const auto cap = static_cast<std::uint32_t>(rng() % 30);
    auto s = initial_state(cap, rng(), 0, 1 + rng() % 6);
    FailurePlan plan;
    switch (rng() % 3) {
      case 0: plan = FailurePlan::none(); break;
      case 1: plan = FailurePlan::probabilistic(static_cast<double>(rng() % 101) / 100); break;
      default: {
        std::set<std::uint64_t> cycles;
        for (int k = 0; k < 5; ++k) cycles.insert(rng() % 40);
        plan = FailurePlan::scripted(cycles);
      }
    }
    const auto n = rng() % 40;
    for (std::uint64_t i = 0; i < n; ++i) {
      s = step(s, plan).state;
      ASSERT_TRUE(s.is_valid());
      ASSERT_EQ(s.stack_capacity - s.stack_count, s.caps_delivered + s.caps_dropped);
    }
  }
}

TEST(Render, EmptySceneIsBlank) {
  const auto img = render_depth(std::vector<Box3>{}, SensorPose{}, Intrinsics{});
  EXPECT_EQ(img.depths.size(), 320u * 240u);
  EXPECT_TRUE(std::all_of(img.depths.begin(), img.depths.end(), [](double d) { return d == 0.0; }));
}

TEST(Render, AxialBox) {
  const auto pose = SensorPose::look_at({0, 0, 0}, {1, 0, 0});
  const Intrinsics k{5, 5, 10, 10, 2, 2};
  // Unit box whose near face is 2 m down the optical axis.
  const auto img = render_depth({Box3{{2, -0.5, -0.5}, {3, 0.5, 0.5}}}, pose, k);
  EXPECT_DOUBLE_EQ(img.at(2, 2), 2.0);
  EXPECT_GT(img.at(0, 0), 0.0);  // the box fills the narrow field of view
}

// Exact hit test against each face rectangle, independent of the slab method.
bool hits_box_face(const Point3& o, const Point3& d, const Box3& b) {
  const double lo[3] = {b.min.x, b.min.y, b.min.z}, hi[3] = {b.max.x, b.max.y, b.max.z};
  const double oo[3] = {o.x, o.y, o.z}, dd[3] = {d.x, d.y, d.z};
  for (int a = 0; a < 3; ++a) {
    if (dd[a] == 0) continue;
    for (double plane : {lo[a], hi[a]}) {
      const double t = (plane - oo[a]) / dd[a];
      if (t <= 0) continue;
      bool inside = true;
      for (int c = 0; c < 3 && inside; ++c) {
        if (c == a) continue;
        const double x = oo[c] + t * dd[c];
        inside = x >= lo[c] && x <= hi[c];
      }
      if (inside) return true;
    }
  }
  return false;
}

TEST(Render, StagingCapChangesExactlyItsPixels) {
  const auto t = scene();
  auto s = initial_state(6, 1);
  s.staging_occupied = false;
  const auto without = render_depth(s, t);
  s.staging_occupied = true;
  const auto with = render_depth(s, t);
  const auto cap = t.staging_cap();
  std::size_t changed = 0;
  const auto& k = t.intrinsics;
  for (std::uint32_t v = 0; v < k.height; ++v) {
    for (std::uint32_t u = 0; u < k.width; ++u) {
      const Point3 dir = t.pose.right * ((u - k.cx) / k.fx) + t.pose.down * ((v - k.cy) / k.fy) + t.pose.forward;
      const bool differs = with.at(u, v) != without.at(u, v);
      ASSERT_EQ(differs, hits_box_face(t.pose.position, dir, cap)) << u << "," << v;
      changed += differs;
    }
  }
  EXPECT_GT(changed, 20u);
}

TEST(Render, CloudLiesOnSceneSurfaces) {
  const auto t = scene();
  auto s = initial_state(6, 1);
  s.staging_occupied = true;
  const auto frame = to_factory_frame(render_depth(s, t), t.pose, 1, 0);
  ASSERT_GT(frame.points.size(), 1000u);
  const auto boxes = t.boxes(s);
  for (const auto& p : frame.points) {
    const bool on_some = std::any_of(boxes.begin(), boxes.end(), [&](const Box3& b) {
      const Box3 grown{b.min - Point3{1e-9, 1e-9, 1e-9}, b.max + Point3{1e-9, 1e-9, 1e-9}};
      return contains(grown, p);
    });
    ASSERT_TRUE(on_some) << fabwatch::spatial::to_string(p);
  }
}

TEST(Scene, CapsStayInsideTheirZones) {
  const auto t = scene();
  for (std::uint32_t n = 0; n <= 40; ++n) {
    for (const auto& b : t.stack_caps(n)) EXPECT_TRUE(fabwatch::spatial::encloses(t.stack_zone, b));
  }
  EXPECT_EQ(t.stack_caps(40).size(), 15u);
  for (std::size_t slots = 1; slots <= 6; ++slots) {
    for (std::size_t i = 0; i < slots; ++i) EXPECT_TRUE(fabwatch::spatial::encloses(t.conveyor_zone, t.slot_cap(i, slots)));
  }
  EXPECT_TRUE(fabwatch::spatial::encloses(t.staging_zone, t.staging_cap()));
}

TEST(Scenario, StockModelAndRulesAreValid) {
  const auto m = cap_transfer_model();
  EXPECT_TRUE(fabwatch::spatial::validate_model(m).empty());
  EXPECT_TRUE(fabwatch::analysis::validate_rules(cap_transfer_rules(), m, 60'000).empty());
}

// sim -> broker (at-least-once) -> dedup -> engine
struct Detection {
  std::size_t cap_missing_raises = 0;
  std::size_t fault_raises = 0;
  std::size_t stack_empty_raises = 0;
};

Detection detect(std::uint32_t capacity, std::uint64_t cycles, const FailurePlan& plan, std::uint64_t seed) {
  using namespace fabwatch::ingestion;
  std::uint64_t now = 0;
  Broker broker([&] { return now; });
  const Topic topic("festo.captransfer");
  broker.subscribe({TopicPattern("festo.*"), "analysis", 1000});
  auto s = initial_state(capacity, seed);
  run(s, cycles, plan, scene(), {[&](const SensorReading& r) { broker.publish(topic, r); }, {}});

  fabwatch::analysis::AnalysisEngine engine(cap_transfer_model(), cap_transfer_rules());
  DedupFilter dedup;
  Detection d;
  auto count = [&](const std::vector<fabwatch::analysis::StatusEvent>& evs) {
    for (const auto& e : evs) {
      if (e.condition != Condition::raised) continue;
      d.cap_missing_raises += e.rule_id == "cap_missing";
      d.stack_empty_raises += e.rule_id == "stack_empty";
      d.fault_raises += e.severity == Severity::fault;
    }
  };
  while (true) {
    const auto batch = broker.poll("analysis", 16);
    if (batch.empty()) break;
    for (const auto& del : batch) {
      if (dedup.admit(del.reading)) count(engine.process(del.reading));
      broker.ack("analysis", del.topic, del.offset);
    }
  }
  count(engine.advance_clock(s.clock_ms));
  return d;
}

TEST(Coupling, FailureFreeRunRaisesNoFault) {
  const auto d = detect(30, 20, FailurePlan::none(), 1);
  EXPECT_EQ(d.fault_raises, 0u);
  EXPECT_EQ(d.stack_empty_raises, 0u);
}

TEST(Coupling, ScriptedFailureRaisesOnce) {
  const auto d = detect(30, 10, FailurePlan::scripted({3}), 1);
  EXPECT_EQ(d.cap_missing_raises, 1u);
  EXPECT_EQ(d.fault_raises, 1u);
}

TEST(Coupling, OneRaisePerFailureIncludingAdjacentAndFinal) {
  std::mt19937_64 rng(8);
  for (int iter = 0; iter < 40; ++iter) {
    std::set<std::uint64_t> cycles;
    const auto n = 5 + rng() % 20;
    for (int k = 0; k < 6; ++k) cycles.insert(rng() % n);
    cycles.insert(n - 1);
    auto s = initial_state(40, 1);
    const auto expected = run(s, n, FailurePlan::scripted(cycles), scene(), {}).failures_injected;
    EXPECT_EQ(detect(40, n, FailurePlan::scripted(cycles), 1).cap_missing_raises, expected);
  }
}

TEST(Coupling, StackEmptyRaisedOnceOnExhaustion) {
  const auto d = detect(8, 20, FailurePlan::scripted({2, 5}), 1);
  EXPECT_EQ(d.stack_empty_raises, 1u);
  EXPECT_EQ(d.cap_missing_raises, 2u);
}

}  // namespace
