#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fabwatch/analysis/rule.hpp"
#include "fabwatch/sim/scenario.hpp"
#include "fabwatch/spatial/model.hpp"

namespace fabwatch::config {

// Any unreadable, malformed or invalid configuration. Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  // "host:port" or ":port"; throws ConfigError.
  static Endpoint parse(std::string_view text);
  [[nodiscard]] std::string str() const;

  friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

struct HubSettings {
  Endpoint listen{"127.0.0.1", 9100};
  std::string id = "hub-a";
  std::optional<Endpoint> peer;  // dial out to this hub and link with it
  std::string peer_id;           // required with peer
  std::size_t send_queue = 256;  // per-session outbound messages before the session is dropped
  std::uint64_t retry_ms = 1000;
};

struct BrokerSettings {
  Endpoint listen{"127.0.0.1", 9200};
  std::uint64_t ack_deadline_ms = 5000;
};

struct AnalysisSettings {
  std::string pattern = "festo.*";
  std::string consumer = "analysis";
  std::uint64_t horizon_ms = 60000;
  std::size_t ring_size = 1024;
};

struct SimSettings {
  std::string topic = "festo.captransfer";
  std::string producer = "festo-sim";
  std::uint64_t cycle_delay_ms = 0;  // wall-clock pause between cycles in service mode
};

struct ServiceConfig {
  HubSettings hub;
  BrokerSettings broker;
  AnalysisSettings analysis;
  SimSettings sim;
  std::optional<std::filesystem::path> model_path;
  std::optional<std::filesystem::path> rules_path;
  std::optional<std::filesystem::path> scenario_path;
  std::string log_level = "info";
};

// Looks up an environment variable; injectable for tests.
using Environment = std::function<std::optional<std::string>(const std::string&)>;
std::optional<std::string> process_env(const std::string& name);

// Variables consulted by apply_env, in the order documented in the README.
const std::vector<std::string>& env_variables();

// Relative file paths resolve against the config file's directory.
ServiceConfig parse_service_config(std::string_view yaml, const std::filesystem::path& base_dir = {});
ServiceConfig load_service_config(const std::filesystem::path& path);
// FABWATCH_* variables override values from the file.
void apply_env(ServiceConfig& c, const Environment& env = process_env);

spatial::SpatialModel parse_model(std::string_view yaml);
std::vector<analysis::Rule> parse_rules(std::string_view yaml);
sim::Scenario parse_scenario(std::string_view yaml);

spatial::SpatialModel load_model(const std::filesystem::path& path);
std::vector<analysis::Rule> load_rules(const std::filesystem::path& path);
sim::Scenario load_scenario(const std::filesystem::path& path);

std::string dump_model(const spatial::SpatialModel& m);
std::string dump_rules(const std::vector<analysis::Rule>& rules);
std::string dump_scenario(const sim::Scenario& s);

struct Setup {
  spatial::SpatialModel model;
  std::vector<analysis::Rule> rules;
  sim::Scenario scenario;
};

// Loads the referenced files (stock cap-transfer content where a path is unset) and validates
// model and rules together. Throws ConfigError listing every problem.
Setup load_setup(const ServiceConfig& c);

}  // namespace fabwatch::config
