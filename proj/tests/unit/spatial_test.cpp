#include <random>

#include <gtest/gtest.h>

#include "fabwatch/spatial/model.hpp"

namespace {

using namespace fabwatch::spatial;

const Box3 kUnit{{0, 0, 0}, {1, 1, 1}};

// Independent oracle: the six half-space checks spelled out one by one.
bool oracle_contains(const Box3& b, const Point3& p) {
  if (p.x < b.min.x) return false;
  if (p.x > b.max.x) return false;
  if (p.y < b.min.y) return false;
  if (p.y > b.max.y) return false;
  if (p.z < b.min.z) return false;
  if (p.z > b.max.z) return false;
  return true;
}

Box3 random_box(std::mt19937_64& rng) {
  // Coarse grid so boundary hits are frequent.
  std::uniform_int_distribution<int> d(-4, 4);
  auto a = Point3{d(rng) * 0.5, d(rng) * 0.5, d(rng) * 0.5};
  auto b = Point3{d(rng) * 0.5, d(rng) * 0.5, d(rng) * 0.5};
  return {{std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)},
          {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)}};
}

Point3 random_point(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(-5, 5);
  return {d(rng) * 0.5, d(rng) * 0.5, d(rng) * 0.5};
}

TEST(Contains, BoundaryIsInclusive) { EXPECT_TRUE(contains(kUnit, {0.5, 1.0, 1.0})); }

TEST(Contains, OutsideOnTwoAxes) { EXPECT_FALSE(contains(kUnit, {1.0, 3.0, 2.0})); }

TEST(Contains, DegenerateBoxContainsItsPoint) {
  EXPECT_TRUE(contains(Box3{{0, 0, 0}, {0, 0, 0}}, {0, 0, 0}));
  EXPECT_FALSE(contains(Box3{{0, 0, 0}, {0, 0, 0}}, {0, 0, 1e-12}));
}

TEST(Contains, AgreesWithComponentwiseOracle) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 20000; ++i) {
    const auto b = random_box(rng);
    const auto p = random_point(rng);
    ASSERT_EQ(contains(b, p), oracle_contains(b, p)) << to_string(b) << " " << to_string(p);
  }
}

TEST(Contains, MonotoneUnderEnclosure) {
  std::mt19937_64 rng(11);
  int checked = 0;
  for (int i = 0; i < 20000; ++i) {
    const auto a = random_box(rng);
    std::uniform_int_distribution<int> grow(0, 2);
    const Box3 b{a.min - Point3{grow(rng) * 0.5, grow(rng) * 0.5, grow(rng) * 0.5},
                 a.max + Point3{grow(rng) * 0.5, grow(rng) * 0.5, grow(rng) * 0.5}};
    ASSERT_TRUE(encloses(b, a));
    const auto p = random_point(rng);
    if (contains(a, p)) {
      ASSERT_TRUE(contains(b, p));
      ++checked;
    }
  }
  EXPECT_GT(checked, 500);
}

TEST(Identifier, RejectsEmptyAndWhitespace) {
  EXPECT_THROW(ComponentId(""), InvalidIdentifier);
  EXPECT_THROW(SensorId("stack count"), InvalidIdentifier);
  EXPECT_THROW(SensorId("tab\tbed"), InvalidIdentifier);
  EXPECT_NO_THROW(SensorId("stack_count"));
  EXPECT_NE(SensorId("Stack"), SensorId("stack"));
}

SpatialModel cap_model() {
  SpatialModel m;
  m.zones[ComponentId("cap_stack")] = Box3{{0, 0, 0}, {0.1, 0.1, 0.4}};
  m.anchors[ComponentId("cap_stack")] = Point3{0.05, 0.05, 0.4};
  m.sensor_bindings[SensorId("stack_count")] = ComponentId("cap_stack");
  return m;
}

TEST(ValidateModel, EmptyModelIsValid) { EXPECT_TRUE(validate_model(SpatialModel{}).empty()); }

TEST(ValidateModel, WellFormedModelIsValid) { EXPECT_TRUE(validate_model(cap_model()).empty()); }

TEST(ValidateModel, AnchorOutsideZoneNamesComponent) {
  auto m = cap_model();
  m.anchors[ComponentId("cap_stack")] = Point3{0.05, 0.05, 0.5};
  const auto v = validate_model(m);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].id, "cap_stack");
  EXPECT_EQ(v[0].rule, ModelRule::anchor_outside_zone);
}

TEST(ValidateModel, SensorBoundToUndeclaredComponentNamesSensor) {
  auto m = cap_model();
  m.sensor_bindings[SensorId("pick_actuated")] = ComponentId("gripper");
  const auto v = validate_model(m);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].id, "pick_actuated");
  EXPECT_EQ(v[0].rule, ModelRule::unbound_component);
}

TEST(ValidateModel, AnchorWithoutZoneAndInvalidZone) {
  SpatialModel m;
  m.anchors[ComponentId("ghost")] = Point3{};
  m.zones[ComponentId("bad")] = Box3{{1, 0, 0}, {0, 1, 1}};
  const auto v = validate_model(m);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0].rule, ModelRule::invalid_zone);
  EXPECT_EQ(v[0].id, "bad");
  EXPECT_EQ(v[1].rule, ModelRule::anchor_without_zone);
  EXPECT_EQ(v[1].id, "ghost");
}

}  // namespace
