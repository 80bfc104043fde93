#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fabwatch/analysis/rule.hpp"
#include "fabwatch/sim/scenario.hpp"
#include "fabwatch/spatial/model.hpp"

namespace fabwatch::app {

struct DemoOptions {
  std::string topic = "festo.captransfer";
  std::string producer = "festo-sim";
  std::uint64_t horizon_ms = 60000;
  std::uint64_t ack_deadline_ms = 5000;
  std::chrono::milliseconds pace{0};  // wall-clock pause between cycles
  bool serve_hub = true;              // put the hub on a loopback port and watch it with an AR client
};

struct DemoSummary {
  std::uint64_t cycles = 0;
  std::uint64_t failures_injected = 0;
  std::uint64_t faults_raised = 0;
  std::uint64_t faults_cleared = 0;
  std::uint64_t warnings_raised = 0;
  std::uint64_t readings_published = 0;
  std::uint64_t readings_processed = 0;
  std::uint64_t duplicates_dropped = 0;
  std::uint64_t frames_broadcast = 0;
  std::uint64_t status_pushed = 0;
  std::uint64_t status_received = 0;  // by the AR client, when serving
  std::vector<double> latencies_ms;   // reading publish -> status push, per pushed event
  double latency_p50_ms = 0;
  double latency_p95_ms = 0;
  double latency_max_ms = 0;
  double elapsed_ms = 0;
  std::vector<analysis::StatusEvent> events;
  std::string error;  // non-empty when a component failed

  [[nodiscard]] bool ok() const noexcept { return error.empty() && faults_raised == failures_injected; }
};

// Nearest-rank percentile of `v` (p in [0, 100]); 0 for an empty vector.
double percentile(std::vector<double> v, double p);

/// Broker, analysis engine, hub and simulator in one process: the simulator publishes to the
/// broker, one analysis thread consumes with dedup and pushes status events into the hub.
DemoSummary run_demo(const spatial::SpatialModel& model, const std::vector<analysis::Rule>& rules,
                     const sim::Scenario& scenario, const DemoOptions& opts = {});

}  // namespace fabwatch::app
