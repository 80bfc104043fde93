#include "fabwatch/app/demo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "fabwatch/analysis/engine.hpp"
#include "fabwatch/hub/hub.hpp"
#include "fabwatch/ingestion/broker.hpp"
#include "fabwatch/ingestion/dedup.hpp"
#include "fabwatch/net/hub_net.hpp"

namespace fabwatch::app {

using Clock = std::chrono::steady_clock;

double percentile(std::vector<double> v, double p) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

namespace {

double ms_since(Clock::time_point t) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t).count();
}

void tally(DemoSummary& s, const analysis::StatusEvent& e) {
  using analysis::Condition;
  using analysis::Severity;
  if (e.severity == Severity::fault) {
    if (e.condition == Condition::raised) ++s.faults_raised;
    else ++s.faults_cleared;
  } else if (e.severity == Severity::warning && e.condition == Condition::raised) {
    ++s.warnings_raised;
  }
  s.events.push_back(e);
}

}  // namespace

DemoSummary run_demo(const spatial::SpatialModel& model, const std::vector<analysis::Rule>& rules,
                     const sim::Scenario& scenario, const DemoOptions& opts) {
  const auto started = Clock::now();
  DemoSummary s;

  // Setup problems surface as exceptions before any thread starts.
  const ingestion::Topic topic(opts.topic);
  auto scene = sim::template_from_model(model);
  scene.intrinsics = scenario.intrinsics;
  analysis::AnalysisEngine engine(model, rules, {opts.horizon_ms, 1024});
  auto state = sim::initial_state(scenario.stack_capacity, scenario.seed, 0, scenario.conveyor_slots);

  ingestion::Broker broker;
  const ingestion::Subscription sub{ingestion::TopicPattern(opts.topic), "analysis", opts.ack_deadline_ms};
  broker.subscribe(sub);

  hub::Hub hub("demo");
  std::atomic<std::uint64_t> received{0};
  std::unique_ptr<net::HubServer> server;
  std::unique_ptr<net::HubClient> ar;
  if (opts.serve_hub) {
    server = std::make_unique<net::HubServer>(hub, net::HubServerOptions{});
    hub::RegisterRequest req;
    req.role = hub::ClientRole::ar;
    ar = std::make_unique<net::HubClient>("127.0.0.1", server->port(), req, [&](const hub::Message& m, std::size_t) {
      if (m.type == hub::MessageType::status) ++received;
    });
  }

  std::mutex mu;  // guards published_at, s.events, s.latencies_ms, s.error
  std::unordered_map<std::uint64_t, Clock::time_point> published_at;
  std::atomic<std::uint64_t> published{0};
  std::atomic<bool> sim_done{false};

  std::thread analysis_thread([&] {
    ingestion::BrokerConsumer consumer(broker, sub);
    ingestion::DedupFilter dedup;
    try {
      while (true) {
        const auto batch = consumer.next(std::chrono::milliseconds(20));
        if (batch.empty()) {
          if (sim_done && dedup.stats().admitted >= published) break;
          continue;
        }
        for (const auto& d : batch) {
          if (dedup.admit(d.reading)) {
            for (const auto& e : engine.process(d.reading)) {
              hub.push_status(e);
              std::lock_guard lock(mu);
              s.latencies_ms.push_back(ms_since(published_at.at(d.reading.seq)));
              tally(s, e);
            }
          }
          consumer.ack(d.topic, d.offset);
        }
      }
      s.readings_processed = dedup.stats().admitted;
      s.duplicates_dropped = dedup.stats().duplicates;
    } catch (const std::exception& e) {
      std::lock_guard lock(mu);
      s.error = std::string("analysis: ") + e.what();
    }
  });

  sim::RunSinks sinks;
  sinks.reading = [&](const ingestion::SensorReading& r) {
    {
      std::lock_guard lock(mu);
      published_at[r.seq] = Clock::now();
    }
    broker.publish(topic, r);
    ++published;
    if (opts.pace.count() > 0 && r.sensor == sim::kStagingOccupied) std::this_thread::sleep_for(opts.pace);
  };
  sinks.frame = [&](const pointcloud::PointCloudFrame& f) { hub.broadcast_frame(f); };
  const auto run = sim::run(state, scenario.cycles, scenario.plan, scene, sinks, {scenario.frame_every, opts.producer});
  sim_done = true;
  analysis_thread.join();

  if (run.aborted) s.error = "sim: " + run.error;
  if (s.error.empty()) {
    // Deadlines that fall after the last reading.
    for (const auto& e : engine.advance_clock(run.end_clock_ms)) {
      hub.push_status(e);
      tally(s, e);
    }
  }

  s.cycles = run.cycles;
  s.failures_injected = run.failures_injected;
  s.readings_published = run.readings_published;
  s.frames_broadcast = run.frames_broadcast;
  s.status_pushed = hub.stats().status_pushed;
  if (ar) {
    const auto deadline = Clock::now() + std::chrono::seconds(2);
    while (received < s.status_pushed && Clock::now() < deadline) std::this_thread::sleep_for(std::chrono::milliseconds(1));
    s.status_received = received;
    ar->close();
    server->stop();
  }
  s.latency_p50_ms = percentile(s.latencies_ms, 50);
  s.latency_p95_ms = percentile(s.latencies_ms, 95);
  s.latency_max_ms = s.latencies_ms.empty() ? 0 : *std::max_element(s.latencies_ms.begin(), s.latencies_ms.end());
  s.elapsed_ms = ms_since(started);
  return s;
}

}  // namespace fabwatch::app
