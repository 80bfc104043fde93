#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "fabwatch/analysis/rule.hpp"

namespace fabwatch::analysis {

enum class AnalysisErrorCode { unbound_sensor, clock_regression, invalid_config };

class AnalysisError : public std::runtime_error {
 public:
  AnalysisError(AnalysisErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  [[nodiscard]] AnalysisErrorCode code() const noexcept { return code_; }

 private:
  AnalysisErrorCode code_;
};

// A reading with the spatial context of the component its sensor observes.
struct SituatedReading {
  SensorReading reading;
  ComponentId component;
  spatial::Box3 zone;
  Point3 anchor;

  friend bool operator==(const SituatedReading&, const SituatedReading&) = default;
};

// Throws AnalysisError{unbound_sensor}. Components without an anchor use their zone center.
SituatedReading situate(const spatial::SpatialModel& model, const SensorReading& r);

inline constexpr std::uint64_t kDefaultHorizonMs = 60'000;
inline constexpr std::size_t kDefaultRingSize = 1024;

struct EngineConfig {
  std::uint64_t horizon_ms = kDefaultHorizonMs;
  std::size_t ring_size = kDefaultRingSize;
};

// Per-sensor recent history: at most ring_size readings, none older than clock - horizon.
// Each sensor's readings are kept in timestamp order.
class HistoryWindow {
 public:
  explicit HistoryWindow(EngineConfig cfg = {}) : cfg_(cfg) {}

  void insert(SituatedReading r);
  void prune(std::uint64_t now_ms);

  [[nodiscard]] const std::deque<SituatedReading>* readings(const SensorId& s) const;
  [[nodiscard]] std::size_t size() const noexcept;

 private:
  EngineConfig cfg_;
  std::map<SensorId, std::deque<SituatedReading>> by_sensor_;
};

struct EngineStats {
  std::uint64_t processed = 0;
  std::uint64_t quarantined = 0;
};

/// Stateful rule evaluation over situated sensor history.
///
/// Output is a pure function of the sequence of process/advance_clock calls. Events produced by
/// one call are ordered by rule id (rules evaluated in ascending id order); within a rule, timeout
/// effects precede effects of the reading itself. Not thread-safe: drive from one thread.
class AnalysisEngine {
 public:
  // Throws AnalysisError{invalid_config} when the model or rules are unusable.
  AnalysisEngine(spatial::SpatialModel model, std::vector<Rule> rules, EngineConfig cfg = {});

  // Unbound sensors are quarantined: counted, no events.
  std::vector<StatusEvent> process(const SensorReading& r);

  // Fires armed timeouts with deadline <= now_ms. Throws AnalysisError{clock_regression}.
  std::vector<StatusEvent> advance_clock(std::uint64_t now_ms);

  [[nodiscard]] std::uint64_t clock() const noexcept { return clock_; }
  [[nodiscard]] const EngineStats& stats() const noexcept { return stats_; }
  [[nodiscard]] const HistoryWindow& window() const noexcept { return window_; }
  [[nodiscard]] const std::vector<Rule>& rules() const noexcept { return rules_; }
  [[nodiscard]] const spatial::SpatialModel& model() const noexcept { return model_; }
  [[nodiscard]] bool is_raised(const std::string& rule_id) const;

 private:
  struct RuleState {
    bool raised = false;
    std::optional<std::uint64_t> armed_at;  // trigger timestamp, absence rules only
  };

  void fire_timeouts(std::uint64_t now, std::vector<StatusEvent>& out);
  void evaluate(std::size_t rule_index, const SituatedReading& r, std::vector<StatusEvent>& out);
  void evaluate_threshold(const Rule& rule, const ThresholdSustained& p, RuleState& st, std::vector<StatusEvent>& out);
  void evaluate_absence(const Rule& rule, const AbsenceAfterTrigger& p, RuleState& st, const SituatedReading& r,
                        std::vector<StatusEvent>& out);
  StatusEvent make_event(const Rule& rule, Condition c, std::uint64_t ts) const;

  spatial::SpatialModel model_;
  std::vector<Rule> rules_;  // sorted by id
  std::vector<RuleState> state_;
  EngineConfig cfg_;
  HistoryWindow window_;
  std::uint64_t clock_ = 0;
  EngineStats stats_;
};

}  // namespace fabwatch::analysis
