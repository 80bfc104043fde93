#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fabwatch/ingestion/reading.hpp"
#include "fabwatch/spatial/model.hpp"

namespace fabwatch::analysis {

using ingestion::SensorReading;
using ingestion::Value;
using spatial::ComponentId;
using spatial::Point3;
using spatial::SensorId;

enum class Severity { info, warning, fault };
enum class Condition { raised, cleared };
enum class Comparison { le, ge, eq };

std::string_view to_string(Severity s) noexcept;
std::string_view to_string(Condition c) noexcept;
std::string_view to_string(Comparison c) noexcept;
std::optional<Severity> severity_from_string(std::string_view s) noexcept;
std::optional<Condition> condition_from_string(std::string_view s) noexcept;
std::optional<Comparison> comparison_from_string(std::string_view s) noexcept;

// `sensor <op> operand`. Booleans compare as 0/1 under le/ge.
struct Predicate {
  SensorId sensor;
  Comparison op = Comparison::eq;
  Value operand = 0.0;

  [[nodiscard]] bool test(const Value& v) const noexcept;

  friend bool operator==(const Predicate&, const Predicate&) = default;
};

// Raised once the predicate has held on every reading of its sensor for at least sustain_ms;
// cleared by the first reading that violates it.
struct ThresholdSustained {
  Predicate condition;
  std::uint64_t sustain_ms = 0;

  friend bool operator==(const ThresholdSustained&, const ThresholdSustained&) = default;
};

// A trigger-matching reading arms a deadline `timeout_ms` later. An expect-matching reading at or
// before the deadline disarms it; reaching the deadline raises. An expect-matching reading while
// raised clears.
struct AbsenceAfterTrigger {
  Predicate trigger;
  Predicate expect;
  std::uint64_t timeout_ms = 0;

  friend bool operator==(const AbsenceAfterTrigger&, const AbsenceAfterTrigger&) = default;
};

struct Rule {
  std::string id;
  std::variant<ThresholdSustained, AbsenceAfterTrigger> params;
  Severity severity = Severity::warning;
  ComponentId component;
  std::string message_template;  // may reference {rule} and {component}

  [[nodiscard]] std::vector<SensorId> sensors() const;
  [[nodiscard]] bool watches(const SensorId& s) const;
  [[nodiscard]] std::string render_message() const;

  friend bool operator==(const Rule&, const Rule&) = default;
};

struct StatusEvent {
  std::string rule_id;
  ComponentId component;
  Condition condition = Condition::raised;
  Severity severity = Severity::info;
  Point3 anchor;
  std::uint64_t timestamp_ms = 0;
  std::string message;

  friend bool operator==(const StatusEvent&, const StatusEvent&) = default;
};

// Problems that prevent a rule set from running against `model`; empty when usable.
std::vector<std::string> validate_rules(const std::vector<Rule>& rules, const spatial::SpatialModel& model,
                                        std::uint64_t horizon_ms);

}  // namespace fabwatch::analysis
