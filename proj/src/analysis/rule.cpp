#include "fabwatch/analysis/rule.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

namespace fabwatch::analysis {

std::string_view to_string(Severity s) noexcept {
  switch (s) {
    case Severity::info: return "info";
    case Severity::warning: return "warning";
    case Severity::fault: return "fault";
  }
  return "?";
}

std::string_view to_string(Condition c) noexcept { return c == Condition::raised ? "raised" : "cleared"; }

std::string_view to_string(Comparison c) noexcept {
  switch (c) {
    case Comparison::le: return "le";
    case Comparison::ge: return "ge";
    case Comparison::eq: return "eq";
  }
  return "?";
}

std::optional<Severity> severity_from_string(std::string_view s) noexcept {
  if (s == "info") return Severity::info;
  if (s == "warning") return Severity::warning;
  if (s == "fault") return Severity::fault;
  return std::nullopt;
}

std::optional<Condition> condition_from_string(std::string_view s) noexcept {
  if (s == "raised") return Condition::raised;
  if (s == "cleared") return Condition::cleared;
  return std::nullopt;
}

std::optional<Comparison> comparison_from_string(std::string_view s) noexcept {
  if (s == "le" || s == "<=") return Comparison::le;
  if (s == "ge" || s == ">=") return Comparison::ge;
  if (s == "eq" || s == "==") return Comparison::eq;
  return std::nullopt;
}

namespace {

double as_number(const Value& v) {
  if (const auto* b = std::get_if<bool>(&v)) return *b ? 1.0 : 0.0;
  return std::get<double>(v);
}

}  // namespace

bool Predicate::test(const Value& v) const noexcept {
  const double a = as_number(v);
  const double b = as_number(operand);
  switch (op) {
    case Comparison::le: return a <= b;
    case Comparison::ge: return a >= b;
    case Comparison::eq: return a == b;
  }
  return false;
}

std::vector<SensorId> Rule::sensors() const {
  if (const auto* t = std::get_if<ThresholdSustained>(&params)) return {t->condition.sensor};
  const auto& a = std::get<AbsenceAfterTrigger>(params);
  if (a.trigger.sensor == a.expect.sensor) return {a.trigger.sensor};
  return {a.trigger.sensor, a.expect.sensor};
}

bool Rule::watches(const SensorId& s) const {
  if (const auto* t = std::get_if<ThresholdSustained>(&params)) return t->condition.sensor == s;
  const auto& a = std::get<AbsenceAfterTrigger>(params);
  return a.trigger.sensor == s || a.expect.sensor == s;
}

std::string Rule::render_message() const {
  std::string out;
  std::string_view t = message_template;
  while (!t.empty()) {
    const auto open = t.find('{');
    if (open == std::string_view::npos) {
      out += t;
      break;
    }
    out += t.substr(0, open);
    const auto close = t.find('}', open);
    if (close == std::string_view::npos) {
      out += t.substr(open);
      break;
    }
    const auto key = t.substr(open + 1, close - open - 1);
    if (key == "rule") {
      out += id;
    } else if (key == "component") {
      out += component.str();
    } else {
      out += t.substr(open, close - open + 1);
    }
    t.remove_prefix(close + 1);
  }
  return out;
}

std::vector<std::string> validate_rules(const std::vector<Rule>& rules, const spatial::SpatialModel& model,
                                        std::uint64_t horizon_ms) {
  std::vector<std::string> problems;
  std::set<std::string> ids;
  for (const auto& rule : rules) {
    if (rule.id.empty()) problems.push_back("rule with empty id");
    if (!ids.insert(rule.id).second) problems.push_back(fmt::format("duplicate rule id '{}'", rule.id));
    if (!model.zone(rule.component)) {
      problems.push_back(fmt::format("rule '{}': component '{}' has no zone", rule.id, rule.component.str()));
    }
    for (const auto& s : rule.sensors()) {
      if (!model.component_of(s)) {
        problems.push_back(fmt::format("rule '{}': sensor '{}' is not bound", rule.id, s.str()));
      }
    }
    if (const auto* t = std::get_if<ThresholdSustained>(&rule.params)) {
      if (t->sustain_ms > horizon_ms) {
        problems.push_back(fmt::format("rule '{}': sustain_ms {} exceeds history horizon {}", rule.id,
                                       t->sustain_ms, horizon_ms));
      }
    } else if (std::get<AbsenceAfterTrigger>(rule.params).timeout_ms == 0) {
      problems.push_back(fmt::format("rule '{}': timeout_ms must be positive", rule.id));
    }
  }
  return problems;
}

}  // namespace fabwatch::analysis
