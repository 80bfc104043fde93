#include "fabwatch/analysis/engine.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace fabwatch::analysis {

SituatedReading situate(const spatial::SpatialModel& model, const SensorReading& r) {
  const auto* component = model.component_of(r.sensor);
  if (!component) {
    throw AnalysisError(AnalysisErrorCode::unbound_sensor, fmt::format("sensor '{}' is not bound", r.sensor.str()));
  }
  const auto* zone = model.zone(*component);
  if (!zone) {
    throw AnalysisError(AnalysisErrorCode::unbound_sensor,
                        fmt::format("sensor '{}' is bound to '{}', which has no zone", r.sensor.str(),
                                    component->str()));
  }
  const auto* anchor = model.anchor(*component);
  return {r, *component, *zone, anchor ? *anchor : zone->center()};
}

void HistoryWindow::insert(SituatedReading r) {
  auto& ring = by_sensor_[r.reading.sensor];
  const auto ts = r.reading.timestamp_ms;
  auto pos = std::upper_bound(ring.begin(), ring.end(), ts,
                              [](std::uint64_t t, const SituatedReading& x) { return t < x.reading.timestamp_ms; });
  ring.insert(pos, std::move(r));
  while (ring.size() > cfg_.ring_size) ring.pop_front();
}

void HistoryWindow::prune(std::uint64_t now_ms) {
  if (now_ms < cfg_.horizon_ms) return;
  const auto cutoff = now_ms - cfg_.horizon_ms;
  for (auto it = by_sensor_.begin(); it != by_sensor_.end();) {
    auto& ring = it->second;
    while (!ring.empty() && ring.front().reading.timestamp_ms < cutoff) ring.pop_front();
    it = ring.empty() ? by_sensor_.erase(it) : std::next(it);
  }
}

const std::deque<SituatedReading>* HistoryWindow::readings(const SensorId& s) const {
  auto it = by_sensor_.find(s);
  return it == by_sensor_.end() ? nullptr : &it->second;
}

std::size_t HistoryWindow::size() const noexcept {
  std::size_t n = 0;
  for (const auto& [_, ring] : by_sensor_) n += ring.size();
  return n;
}

AnalysisEngine::AnalysisEngine(spatial::SpatialModel model, std::vector<Rule> rules, EngineConfig cfg)
    : model_(std::move(model)), rules_(std::move(rules)), cfg_(cfg), window_(cfg) {
  if (cfg_.ring_size == 0) throw AnalysisError(AnalysisErrorCode::invalid_config, "ring size must be positive");
  std::vector<std::string> problems;
  for (const auto& v : spatial::validate_model(model_)) problems.push_back(v.message);
  for (auto& p : validate_rules(rules_, model_, cfg_.horizon_ms)) problems.push_back(std::move(p));
  if (!problems.empty()) {
    throw AnalysisError(AnalysisErrorCode::invalid_config, fmt::format("{}", fmt::join(problems, "; ")));
  }
  std::sort(rules_.begin(), rules_.end(), [](const Rule& a, const Rule& b) { return a.id < b.id; });
  state_.resize(rules_.size());
}

bool AnalysisEngine::is_raised(const std::string& rule_id) const {
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    if (rules_[i].id == rule_id) return state_[i].raised;
  }
  return false;
}

StatusEvent AnalysisEngine::make_event(const Rule& rule, Condition c, std::uint64_t ts) const {
  const auto* anchor = model_.anchor(rule.component);
  const Point3 at = anchor ? *anchor : model_.zone(rule.component)->center();
  return {rule.id, rule.component, c, rule.severity, at, ts, rule.render_message()};
}

std::vector<StatusEvent> AnalysisEngine::process(const SensorReading& r) {
  SituatedReading s;
  try {
    s = situate(model_, r);
  } catch (const AnalysisError&) {
    ++stats_.quarantined;
    return {};
  }
  ++stats_.processed;
  clock_ = std::max(clock_, r.timestamp_ms);

  std::vector<StatusEvent> out;
  fire_timeouts(clock_, out);
  window_.insert(s);
  window_.prune(clock_);
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    if (rules_[i].watches(r.sensor)) evaluate(i, s, out);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const StatusEvent& a, const StatusEvent& b) { return a.rule_id < b.rule_id; });
  return out;
}

std::vector<StatusEvent> AnalysisEngine::advance_clock(std::uint64_t now_ms) {
  if (now_ms < clock_) {
    throw AnalysisError(AnalysisErrorCode::clock_regression,
                        fmt::format("clock moved back from {} to {}", clock_, now_ms));
  }
  clock_ = now_ms;
  window_.prune(clock_);
  std::vector<StatusEvent> out;
  fire_timeouts(clock_, out);
  return out;
}

void AnalysisEngine::fire_timeouts(std::uint64_t now, std::vector<StatusEvent>& out) {
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const auto* p = std::get_if<AbsenceAfterTrigger>(&rules_[i].params);
    auto& st = state_[i];
    if (!p || !st.armed_at) continue;
    const auto deadline = *st.armed_at + p->timeout_ms;
    if (deadline > now) continue;
    st.armed_at.reset();
    // Back-to-back failures: close the previous episode so each one is a distinct raise.
    if (st.raised) out.push_back(make_event(rules_[i], Condition::cleared, deadline));
    out.push_back(make_event(rules_[i], Condition::raised, deadline));
    st.raised = true;
  }
}

void AnalysisEngine::evaluate(std::size_t i, const SituatedReading& r, std::vector<StatusEvent>& out) {
  const auto& rule = rules_[i];
  if (const auto* t = std::get_if<ThresholdSustained>(&rule.params)) {
    evaluate_threshold(rule, *t, state_[i], out);
  } else {
    evaluate_absence(rule, std::get<AbsenceAfterTrigger>(rule.params), state_[i], r, out);
  }
}

void AnalysisEngine::evaluate_threshold(const Rule& rule, const ThresholdSustained& p, RuleState& st,
                                        std::vector<StatusEvent>& out) {
  const auto* ring = window_.readings(p.condition.sensor);
  if (!ring || ring->empty()) return;
  const auto& latest = ring->back().reading;
  if (!p.condition.test(latest.value)) {
    if (st.raised) {
      out.push_back(make_event(rule, Condition::cleared, latest.timestamp_ms));
      st.raised = false;
    }
    return;
  }
  if (st.raised) return;
  std::uint64_t run_start = latest.timestamp_ms;
  for (auto it = ring->rbegin(); it != ring->rend() && p.condition.test(it->reading.value); ++it) {
    run_start = it->reading.timestamp_ms;
  }
  if (latest.timestamp_ms - run_start >= p.sustain_ms) {
    out.push_back(make_event(rule, Condition::raised, latest.timestamp_ms));
    st.raised = true;
  }
}

void AnalysisEngine::evaluate_absence(const Rule& rule, const AbsenceAfterTrigger& p, RuleState& st,
                                      const SituatedReading& r, std::vector<StatusEvent>& out) {
  const auto& reading = r.reading;
  if (reading.sensor == p.expect.sensor && p.expect.test(reading.value)) {
    if (st.armed_at && reading.timestamp_ms >= *st.armed_at) st.armed_at.reset();
    if (st.raised) {
      out.push_back(make_event(rule, Condition::cleared, reading.timestamp_ms));
      st.raised = false;
    }
  }
  if (reading.sensor == p.trigger.sensor && p.trigger.test(reading.value) && !st.armed_at) {
    st.armed_at = reading.timestamp_ms;
  }
}

}  // namespace fabwatch::analysis
