#include "fabwatch/config/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <yaml-cpp/yaml.h>

namespace fabwatch::config {

namespace fs = std::filesystem;
using spatial::ComponentId;
using spatial::SensorId;

namespace {

[[noreturn]] void fail(const YAML::Node& n, std::string_view what) {
  const auto m = n.Mark();
  if (m.line >= 0) throw ConfigError(fmt::format("line {}: {}", m.line + 1, what));
  throw ConfigError(std::string(what));
}

template <typename T>
T scalar(const YAML::Node& n, std::string_view key) {
  if (!n.IsScalar()) fail(n, fmt::format("'{}' must be a scalar", key));
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    fail(n, fmt::format("'{}' has an invalid value '{}'", key, n.Scalar()));
  }
}

template <typename T>
void read(const YAML::Node& map, const char* key, T& out) {
  if (const auto n = map[key]) out = scalar<T>(n, key);
}

YAML::Node section(const YAML::Node& root, const char* key) {
  const auto n = root[key];
  if (n && !n.IsMap()) fail(n, fmt::format("'{}' must be a mapping", key));
  return n;
}

spatial::Point3 point(const YAML::Node& n, std::string_view key) {
  if (!n.IsSequence() || n.size() != 3) fail(n, fmt::format("'{}' must be a list of three numbers", key));
  return {scalar<double>(n[0], key), scalar<double>(n[1], key), scalar<double>(n[2], key)};
}

template <typename Id>
Id ident(const YAML::Node& n, std::string_view key) {
  const auto s = scalar<std::string>(n, key);
  try {
    return Id(s);
  } catch (const spatial::InvalidIdentifier& e) {
    fail(n, fmt::format("'{}': {}", key, e.what()));
  }
}

YAML::Node parse_yaml(std::string_view text) {
  try {
    auto root = YAML::Load(std::string(text));
    if (root.IsNull()) return YAML::Node(YAML::NodeType::Map);
    if (!root.IsMap()) fail(root, "top level must be a mapping");
    return root;
  } catch (const YAML::ParserException& e) {
    throw ConfigError(fmt::format("line {}: {}", e.mark.line + 1, e.msg));
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot read '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename F>
auto with_path(const fs::path& path, F&& parse) {
  const auto text = read_file(path);
  try {
    return parse(text);
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

analysis::Predicate predicate(const YAML::Node& n, std::string_view key) {
  if (!n || !n.IsMap()) fail(n, fmt::format("'{}' must be a mapping with sensor, op and value", key));
  analysis::Predicate p;
  p.sensor = ident<SensorId>(n["sensor"], "sensor");
  const auto op = scalar<std::string>(n["op"], "op");
  const auto parsed = analysis::comparison_from_string(op);
  if (!parsed) fail(n["op"], fmt::format("unknown comparison '{}'", op));
  p.op = *parsed;
  const auto v = n["value"];
  if (!v || !v.IsScalar()) fail(n, fmt::format("'{}.value' is required", key));
  if (v.Scalar() == "true" || v.Scalar() == "false") {
    p.operand = v.Scalar() == "true";
  } else {
    p.operand = scalar<double>(v, "value");
  }
  return p;
}

void emit_point(YAML::Emitter& out, const spatial::Point3& p) {
  out << YAML::Flow << YAML::BeginSeq << p.x << p.y << p.z << YAML::EndSeq;
}

void emit_predicate(YAML::Emitter& out, const analysis::Predicate& p) {
  out << YAML::Flow << YAML::BeginMap << YAML::Key << "sensor" << YAML::Value << p.sensor.str() << YAML::Key << "op"
      << YAML::Value << std::string(analysis::to_string(p.op)) << YAML::Key << "value" << YAML::Value;
  if (const auto* b = std::get_if<bool>(&p.operand)) {
    out << *b;
  } else {
    out << std::get<double>(p.operand);
  }
  out << YAML::EndMap;
}

}  // namespace

Endpoint Endpoint::parse(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos) throw ConfigError(fmt::format("address '{}' must be host:port", text));
  Endpoint e;
  if (colon > 0) e.host = std::string(text.substr(0, colon));
  const auto port = text.substr(colon + 1);
  unsigned value = 0;
  const auto [end, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
  if (ec != std::errc{} || end != port.data() + port.size() || value > 65535) {
    throw ConfigError(fmt::format("address '{}' has an invalid port", text));
  }
  e.port = static_cast<std::uint16_t>(value);
  return e;
}

std::string Endpoint::str() const { return fmt::format("{}:{}", host, port); }

std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

const std::vector<std::string>& env_variables() {
  static const std::vector<std::string> vars = {
      "FABWATCH_HUB_LISTEN", "FABWATCH_HUB_ID",    "FABWATCH_HUB_PEER",  "FABWATCH_HUB_PEER_ID",
      "FABWATCH_BROKER_LISTEN", "FABWATCH_MODEL", "FABWATCH_RULES", "FABWATCH_SCENARIO", "FABWATCH_LOG_LEVEL",
  };
  return vars;
}

ServiceConfig parse_service_config(std::string_view yaml, const fs::path& base_dir) {
  const auto root = parse_yaml(yaml);
  ServiceConfig c;
  auto endpoint = [](const YAML::Node& n, const char* key, Endpoint& out) {
    if (const auto v = n[key]) {
      try {
        out = Endpoint::parse(scalar<std::string>(v, key));
      } catch (const ConfigError& e) {
        fail(v, e.what());
      }
    }
  };
  if (const auto hub = section(root, "hub")) {
    endpoint(hub, "listen", c.hub.listen);
    read(hub, "id", c.hub.id);
    if (hub["peer"]) {
      Endpoint peer;
      endpoint(hub, "peer", peer);
      c.hub.peer = peer;
    }
    read(hub, "peer_id", c.hub.peer_id);
    read(hub, "send_queue", c.hub.send_queue);
    read(hub, "retry_ms", c.hub.retry_ms);
  }
  if (const auto broker = section(root, "broker")) {
    endpoint(broker, "listen", c.broker.listen);
    read(broker, "ack_deadline_ms", c.broker.ack_deadline_ms);
  }
  if (const auto a = section(root, "analysis")) {
    read(a, "pattern", c.analysis.pattern);
    read(a, "consumer", c.analysis.consumer);
    read(a, "horizon_ms", c.analysis.horizon_ms);
    read(a, "ring_size", c.analysis.ring_size);
  }
  if (const auto s = section(root, "sim")) {
    read(s, "topic", c.sim.topic);
    read(s, "producer", c.sim.producer);
    read(s, "cycle_delay_ms", c.sim.cycle_delay_ms);
  }
  auto path = [&](const char* key, std::optional<fs::path>& out) {
    if (const auto v = root[key]) out = resolve(base_dir, scalar<std::string>(v, key));
  };
  path("model", c.model_path);
  path("rules", c.rules_path);
  path("scenario", c.scenario_path);
  read(root, "log_level", c.log_level);

  if (c.hub.id.empty()) fail(root["hub"], "hub.id must not be empty");
  if (c.hub.peer && c.hub.peer_id.empty()) fail(root["hub"], "hub.peer requires hub.peer_id");
  if (c.hub.send_queue == 0) fail(root["hub"], "hub.send_queue must be positive");
  if (c.broker.ack_deadline_ms == 0) fail(root["broker"], "broker.ack_deadline_ms must be positive");
  return c;
}

ServiceConfig load_service_config(const fs::path& path) {
  auto c = with_path(path, [&](const std::string& text) {
    return parse_service_config(text, path.parent_path());
  });
  return c;
}

void apply_env(ServiceConfig& c, const Environment& env) {
  auto get = [&](const char* name) { return env(name); };
  try {
    if (auto v = get("FABWATCH_HUB_LISTEN")) c.hub.listen = Endpoint::parse(*v);
    if (auto v = get("FABWATCH_HUB_ID")) c.hub.id = *v;
    if (auto v = get("FABWATCH_HUB_PEER")) c.hub.peer = v->empty() ? std::nullopt : std::optional(Endpoint::parse(*v));
    if (auto v = get("FABWATCH_HUB_PEER_ID")) c.hub.peer_id = *v;
    if (auto v = get("FABWATCH_BROKER_LISTEN")) c.broker.listen = Endpoint::parse(*v);
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("environment: {}", e.what()));
  }
  if (auto v = get("FABWATCH_MODEL")) c.model_path = *v;
  if (auto v = get("FABWATCH_RULES")) c.rules_path = *v;
  if (auto v = get("FABWATCH_SCENARIO")) c.scenario_path = *v;
  if (auto v = get("FABWATCH_LOG_LEVEL")) c.log_level = *v;
  if (c.hub.id.empty()) throw ConfigError("environment: FABWATCH_HUB_ID must not be empty");
  if (c.hub.peer && c.hub.peer_id.empty()) throw ConfigError("environment: hub peer requires a peer id");
}

spatial::SpatialModel parse_model(std::string_view yaml) {
  const auto root = parse_yaml(yaml);
  spatial::SpatialModel m;
  const auto zones = section(root, "zones");
  if (!zones) fail(root, "'zones' is required");
  for (const auto& kv : zones) {
    const auto id = ident<ComponentId>(kv.first, "zone id");
    const auto& z = kv.second;
    if (!z.IsMap() || !z["min"] || !z["max"]) fail(z, fmt::format("zone '{}' needs min and max", id.str()));
    m.zones[id] = {point(z["min"], "min"), point(z["max"], "max")};
    if (z["anchor"]) m.anchors[id] = point(z["anchor"], "anchor");
  }
  if (const auto sensors = section(root, "sensors")) {
    for (const auto& kv : sensors) {
      m.sensor_bindings[ident<SensorId>(kv.first, "sensor id")] = ident<ComponentId>(kv.second, "component");
    }
  }
  return m;
}

std::vector<analysis::Rule> parse_rules(std::string_view yaml) {
  const auto root = parse_yaml(yaml);
  const auto list = root["rules"];
  if (!list || !list.IsSequence()) fail(root, "'rules' must be a list");
  std::vector<analysis::Rule> rules;
  for (const auto& n : list) {
    if (!n.IsMap()) fail(n, "each rule must be a mapping");
    analysis::Rule r;
    r.id = scalar<std::string>(n["id"], "id");
    const auto kind = scalar<std::string>(n["kind"], "kind");
    if (kind == "threshold_sustained") {
      analysis::ThresholdSustained t;
      t.condition = predicate(n["condition"], "condition");
      t.sustain_ms = scalar<std::uint64_t>(n["sustain_ms"], "sustain_ms");
      r.params = t;
    } else if (kind == "absence_after_trigger") {
      analysis::AbsenceAfterTrigger a;
      a.trigger = predicate(n["trigger"], "trigger");
      a.expect = predicate(n["expect"], "expect");
      a.timeout_ms = scalar<std::uint64_t>(n["timeout_ms"], "timeout_ms");
      r.params = a;
    } else {
      fail(n["kind"], fmt::format("unknown rule kind '{}'", kind));
    }
    const auto sev = scalar<std::string>(n["severity"], "severity");
    const auto parsed = analysis::severity_from_string(sev);
    if (!parsed) fail(n["severity"], fmt::format("unknown severity '{}'", sev));
    r.severity = *parsed;
    r.component = ident<ComponentId>(n["component"], "component");
    if (n["message"]) r.message_template = scalar<std::string>(n["message"], "message");
    rules.push_back(std::move(r));
  }
  return rules;
}

sim::Scenario parse_scenario(std::string_view yaml) {
  const auto root = parse_yaml(yaml);
  sim::Scenario s;
  read(root, "stack_capacity", s.stack_capacity);
  read(root, "cycles", s.cycles);
  read(root, "seed", s.seed);
  read(root, "frame_every", s.frame_every);
  read(root, "conveyor_slots", s.conveyor_slots);
  if (s.conveyor_slots == 0) fail(root["conveyor_slots"], "conveyor_slots must be at least 1");
  if (const auto f = section(root, "failures")) {
    const auto mode = f["mode"] ? scalar<std::string>(f["mode"], "mode") : std::string("none");
    if (mode == "none") {
      s.plan = sim::FailurePlan::none();
    } else if (mode == "probabilistic") {
      const auto p = scalar<double>(f["p"], "p");
      if (!(p >= 0 && p <= 1)) fail(f["p"], "failures.p must be within [0, 1]");
      s.plan = sim::FailurePlan::probabilistic(p);
    } else if (mode == "scripted") {
      std::set<std::uint64_t> cycles;
      const auto list = f["cycles"];
      if (!list || !list.IsSequence()) fail(f, "scripted failures need a 'cycles' list");
      for (const auto& c : list) cycles.insert(scalar<std::uint64_t>(c, "cycles"));
      s.plan = sim::FailurePlan::scripted(std::move(cycles));
    } else {
      fail(f["mode"], fmt::format("unknown failure mode '{}'", mode));
    }
  }
  if (const auto k = section(root, "sensor")) {
    read(k, "width", s.intrinsics.width);
    read(k, "height", s.intrinsics.height);
    read(k, "fx", s.intrinsics.fx);
    read(k, "fy", s.intrinsics.fy);
    read(k, "cx", s.intrinsics.cx);
    read(k, "cy", s.intrinsics.cy);
    if (s.intrinsics.width == 0 || s.intrinsics.height == 0 || !(s.intrinsics.fx > 0) || !(s.intrinsics.fy > 0)) {
      fail(k, "sensor needs positive width, height, fx and fy");
    }
  }
  return s;
}

spatial::SpatialModel load_model(const fs::path& path) { return with_path(path, parse_model); }
std::vector<analysis::Rule> load_rules(const fs::path& path) { return with_path(path, parse_rules); }
sim::Scenario load_scenario(const fs::path& path) { return with_path(path, parse_scenario); }

std::string dump_model(const spatial::SpatialModel& m) {
  YAML::Emitter out;
  out << YAML::BeginMap << YAML::Key << "zones" << YAML::Value << YAML::BeginMap;
  for (const auto& [id, box] : m.zones) {
    out << YAML::Key << id.str() << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "min" << YAML::Value;
    emit_point(out, box.min);
    out << YAML::Key << "max" << YAML::Value;
    emit_point(out, box.max);
    if (const auto* a = m.anchor(id)) {
      out << YAML::Key << "anchor" << YAML::Value;
      emit_point(out, *a);
    }
    out << YAML::EndMap;
  }
  out << YAML::EndMap << YAML::Key << "sensors" << YAML::Value << YAML::BeginMap;
  for (const auto& [sensor, comp] : m.sensor_bindings) out << YAML::Key << sensor.str() << YAML::Value << comp.str();
  out << YAML::EndMap << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::string dump_rules(const std::vector<analysis::Rule>& rules) {
  YAML::Emitter out;
  out << YAML::BeginMap << YAML::Key << "rules" << YAML::Value << YAML::BeginSeq;
  for (const auto& r : rules) {
    out << YAML::BeginMap << YAML::Key << "id" << YAML::Value << r.id;
    if (const auto* t = std::get_if<analysis::ThresholdSustained>(&r.params)) {
      out << YAML::Key << "kind" << YAML::Value << "threshold_sustained" << YAML::Key << "condition" << YAML::Value;
      emit_predicate(out, t->condition);
      out << YAML::Key << "sustain_ms" << YAML::Value << t->sustain_ms;
    } else {
      const auto& a = std::get<analysis::AbsenceAfterTrigger>(r.params);
      out << YAML::Key << "kind" << YAML::Value << "absence_after_trigger" << YAML::Key << "trigger" << YAML::Value;
      emit_predicate(out, a.trigger);
      out << YAML::Key << "expect" << YAML::Value;
      emit_predicate(out, a.expect);
      out << YAML::Key << "timeout_ms" << YAML::Value << a.timeout_ms;
    }
    out << YAML::Key << "severity" << YAML::Value << std::string(analysis::to_string(r.severity));
    out << YAML::Key << "component" << YAML::Value << r.component.str();
    out << YAML::Key << "message" << YAML::Value << YAML::DoubleQuoted << r.message_template;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::string dump_scenario(const sim::Scenario& s) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "stack_capacity" << YAML::Value << s.stack_capacity;
  out << YAML::Key << "cycles" << YAML::Value << s.cycles;
  out << YAML::Key << "seed" << YAML::Value << s.seed;
  out << YAML::Key << "frame_every" << YAML::Value << s.frame_every;
  out << YAML::Key << "conveyor_slots" << YAML::Value << s.conveyor_slots;
  out << YAML::Key << "failures" << YAML::Value << YAML::BeginMap;
  switch (s.plan.mode) {
    case sim::FailurePlan::Mode::none: out << YAML::Key << "mode" << YAML::Value << "none"; break;
    case sim::FailurePlan::Mode::probabilistic:
      out << YAML::Key << "mode" << YAML::Value << "probabilistic" << YAML::Key << "p" << YAML::Value << s.plan.p;
      break;
    case sim::FailurePlan::Mode::scripted:
      out << YAML::Key << "mode" << YAML::Value << "scripted" << YAML::Key << "cycles" << YAML::Value << YAML::Flow
          << YAML::BeginSeq;
      for (auto c : s.plan.cycles) out << c;
      out << YAML::EndSeq;
      break;
  }
  out << YAML::EndMap;
  const auto& k = s.intrinsics;
  out << YAML::Key << "sensor" << YAML::Value << YAML::Flow << YAML::BeginMap << YAML::Key << "width" << YAML::Value
      << k.width << YAML::Key << "height" << YAML::Value << k.height << YAML::Key << "fx" << YAML::Value << k.fx
      << YAML::Key << "fy" << YAML::Value << k.fy << YAML::Key << "cx" << YAML::Value << k.cx << YAML::Key << "cy"
      << YAML::Value << k.cy << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

Setup load_setup(const ServiceConfig& c) {
  Setup s;
  s.model = c.model_path ? load_model(*c.model_path) : sim::cap_transfer_model();
  s.rules = c.rules_path ? load_rules(*c.rules_path) : sim::cap_transfer_rules();
  s.scenario = c.scenario_path ? load_scenario(*c.scenario_path) : sim::Scenario{};

  std::vector<std::string> problems;
  for (const auto& v : spatial::validate_model(s.model)) problems.push_back(v.message);
  for (auto& p : analysis::validate_rules(s.rules, s.model, c.analysis.horizon_ms)) problems.push_back(std::move(p));
  if (!problems.empty()) throw ConfigError(fmt::format("invalid configuration: {}", fmt::join(problems, "; ")));
  return s;
}

}  // namespace fabwatch::config
