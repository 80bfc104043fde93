#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <iterator>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "fabwatch/analysis/engine.hpp"
#include "fabwatch/app/bench.hpp"
#include "fabwatch/app/demo.hpp"
#include "fabwatch/config/config.hpp"
#include "fabwatch/ingestion/dedup.hpp"
#include "fabwatch/ingestion/errors.hpp"
#include "fabwatch/net/broker_net.hpp"
#include "fabwatch/net/hub_net.hpp"
#include "fabwatch/pointcloud/codec.hpp"

namespace {

using namespace fabwatch;
namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kRuntimeFailure = 1;
constexpr int kConfigError = 2;

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

void wait_for_signal() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
}

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string log_level;
};

config::ServiceConfig load_config(const Globals& g) {
  auto c = g.config.empty() ? config::ServiceConfig{} : config::load_service_config(g.config);
  config::apply_env(c);
  if (!g.log_level.empty()) c.log_level = g.log_level;
  return c;
}

void setup_logging(const std::string& level) {
  auto logger = spdlog::stderr_color_mt("fabwatch");
  logger->set_pattern("%Y-%m-%dT%H:%M:%S.%e %l %v");
  const auto lvl = spdlog::level::from_str(level);
  if (lvl == spdlog::level::off && level != "off") {
    throw config::ConfigError(fmt::format("unknown log level '{}'", level));
  }
  logger->set_level(lvl);
  spdlog::set_default_logger(logger);
}

// field=value record on stdout.
template <typename... Args>
void record(fmt::format_string<Args...> f, Args&&... args) {
  std::cout << fmt::format(f, std::forward<Args>(args)...) << std::endl;
}

std::string event_record(const analysis::StatusEvent& e) {
  return fmt::format("event ts={} rule={} condition={} severity={} component={}", e.timestamp_ms, e.rule_id,
                     analysis::to_string(e.condition), analysis::to_string(e.severity), e.component.str());
}

// ---------------------------------------------------------------------------------------------

struct HubArgs {
  std::string listen, id, peer, peer_id;
};

int cmd_hub(const Globals& g, const HubArgs& a) {
  auto c = load_config(g);
  if (!a.listen.empty()) c.hub.listen = config::Endpoint::parse(a.listen);
  if (!a.id.empty()) c.hub.id = a.id;
  if (!a.peer.empty()) c.hub.peer = config::Endpoint::parse(a.peer);
  if (!a.peer_id.empty()) c.hub.peer_id = a.peer_id;
  if (c.hub.peer && c.hub.peer_id.empty()) throw config::ConfigError("--peer requires --peer-id");
  setup_logging(c.log_level);

  hub::Hub h(c.hub.id);
  net::HubServer server(h, {c.hub.listen.host, c.hub.listen.port, c.hub.send_queue});
  std::unique_ptr<net::PeerLink> link;
  if (c.hub.peer) {
    link = std::make_unique<net::PeerLink>(
        h, net::PeerLinkOptions{c.hub.peer->host, c.hub.peer->port, c.hub.peer_id,
                                std::chrono::milliseconds(c.hub.retry_ms), 4 * c.hub.send_queue});
  }
  spdlog::info("hub ready id={} listen={}:{} peer={}", h.id(), c.hub.listen.host, server.port(),
               c.hub.peer ? c.hub.peer->str() : "none");
  wait_for_signal();
  spdlog::info("hub stopping");
  if (link) link->stop();
  server.stop();
  const auto s = h.stats();
  record("hub id={} sessions_opened={} sessions_closed={} interactions_applied={} duplicates_dropped={} "
         "frames_relayed={} frames_stale={} frame_sends={} status_pushed={} version={}",
         h.id(), s.sessions_opened, s.sessions_closed, s.interactions_applied, s.duplicates_dropped, s.frames_relayed,
         s.frames_stale, s.frame_sends, s.status_pushed, h.state().version);
  return kOk;
}

int cmd_broker(const Globals& g, const std::string& listen) {
  auto c = load_config(g);
  if (!listen.empty()) c.broker.listen = config::Endpoint::parse(listen);
  setup_logging(c.log_level);

  ingestion::Broker broker;
  net::BrokerServer server(broker, {c.broker.listen.host, c.broker.listen.port});
  spdlog::info("broker ready listen={}:{} ack_deadline_ms={}", c.broker.listen.host, server.port(),
               c.broker.ack_deadline_ms);
  wait_for_signal();
  spdlog::info("broker stopping");
  server.stop();
  broker.shutdown();
  const auto s = broker.stats();
  record("broker published={} delivered={} redelivered={} acked={}", s.published, s.delivered, s.redelivered,
         s.acked);
  return kOk;
}

struct PeerArgs {
  std::string broker, hub;
};

int cmd_analysis(const Globals& g, const PeerArgs& a) {
  auto c = load_config(g);
  const auto broker_ep = a.broker.empty() ? c.broker.listen : config::Endpoint::parse(a.broker);
  const auto hub_ep = a.hub.empty() ? c.hub.listen : config::Endpoint::parse(a.hub);
  setup_logging(c.log_level);
  const auto setup = config::load_setup(c);

  analysis::AnalysisEngine engine(setup.model, setup.rules, {c.analysis.horizon_ms, c.analysis.ring_size});
  const ingestion::Subscription sub{ingestion::TopicPattern(c.analysis.pattern), c.analysis.consumer,
                                    c.broker.ack_deadline_ms};
  net::RemoteConsumer consumer(broker_ep.host, broker_ep.port, sub);
  hub::RegisterRequest req;
  req.role = hub::ClientRole::producer;
  net::HubClient hubc(hub_ep.host, hub_ep.port, req);
  spdlog::info("analysis ready broker={} hub={} pattern={} rules={}", broker_ep.str(), hub_ep.str(), c.analysis.pattern,
               setup.rules.size());

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  ingestion::DedupFilter dedup;
  std::uint64_t raised = 0, cleared = 0;
  while (!g_stop) {
    for (const auto& d : consumer.next(std::chrono::milliseconds(100))) {
      if (dedup.admit(d.reading)) {
        for (const auto& e : engine.process(d.reading)) {
          hubc.send_status(e);
          (e.condition == analysis::Condition::raised ? raised : cleared)++;
          spdlog::info("status rule={} condition={} severity={} ts={}", e.rule_id, analysis::to_string(e.condition),
                       analysis::to_string(e.severity), e.timestamp_ms);
        }
      }
      consumer.ack(d.topic, d.offset);
    }
  }
  spdlog::info("analysis stopping");
  hubc.flush(std::chrono::seconds(2));
  record("analysis processed={} duplicates={} stragglers={} quarantined={} raised={} cleared={} clock_ms={}",
         dedup.stats().admitted, dedup.stats().duplicates, dedup.stats().stragglers, engine.stats().quarantined, raised,
         cleared, engine.clock());
  return kOk;
}

struct SimArgs {
  PeerArgs peers;
  std::optional<std::uint64_t> cycles;
  bool no_frames = false;
};

int cmd_sim(const Globals& g, const SimArgs& a) {
  auto c = load_config(g);
  const auto broker_ep = a.peers.broker.empty() ? c.broker.listen : config::Endpoint::parse(a.peers.broker);
  const auto hub_ep = a.peers.hub.empty() ? c.hub.listen : config::Endpoint::parse(a.peers.hub);
  setup_logging(c.log_level);
  auto setup = config::load_setup(c);
  auto& sc = setup.scenario;
  if (g.seed) sc.seed = *g.seed;
  if (a.cycles) sc.cycles = *a.cycles;
  const ingestion::Topic topic(c.sim.topic);
  auto scene = sim::template_from_model(setup.model);
  scene.intrinsics = sc.intrinsics;

  net::RemotePublisher publisher(broker_ep.host, broker_ep.port);
  std::unique_ptr<net::HubClient> hubc;
  if (!a.no_frames && sc.frame_every > 0) {
    hub::RegisterRequest req;
    req.role = hub::ClientRole::producer;
    hubc = std::make_unique<net::HubClient>(hub_ep.host, hub_ep.port, req);
  }
  spdlog::info("sim ready broker={} hub={} topic={} cycles={} seed={}", broker_ep.str(),
               hubc ? hub_ep.str() : "none", topic.str(), sc.cycles, sc.seed);

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  sim::RunSinks sinks;
  sinks.reading = [&](const ingestion::SensorReading& r) {
    if (g_stop) throw std::runtime_error("interrupted");
    publisher.publish(topic, r);
    if (r.sensor == sim::kStagingOccupied && c.sim.cycle_delay_ms > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(c.sim.cycle_delay_ms));
    }
  };
  if (hubc) sinks.frame = [&](const pointcloud::PointCloudFrame& f) { hubc->send_frame(f); };
  auto state = sim::initial_state(sc.stack_capacity, sc.seed, 0, sc.conveyor_slots);
  const auto s = sim::run(state, sc.cycles, sc.plan, scene, sinks, {sc.frame_every, c.sim.producer});
  if (hubc) hubc->flush(std::chrono::seconds(5));
  record("sim cycles={} failures_injected={} readings_published={} frames_broadcast={} caps_delivered={} "
         "caps_dropped={} stack_remaining={} end_clock_ms={} aborted={}",
         s.cycles, s.failures_injected, s.readings_published, s.frames_broadcast, s.caps_delivered, s.caps_dropped,
         s.stack_remaining, s.end_clock_ms, s.aborted);
  if (s.aborted && s.error != "interrupted") {
    spdlog::error("sim aborted: {}", s.error);
    return kRuntimeFailure;
  }
  return kOk;
}

struct DemoArgs {
  std::string scenario;
  std::uint64_t pace_ms = 0;
  bool events = false;
  bool no_hub = false;
};

int cmd_demo(const Globals& g, const DemoArgs& a) {
  auto c = load_config(g);
  if (!a.scenario.empty()) c.scenario_path = a.scenario;
  setup_logging(c.log_level);
  auto setup = config::load_setup(c);
  if (g.seed) setup.scenario.seed = *g.seed;

  app::DemoOptions opts;
  opts.topic = c.sim.topic;
  opts.producer = c.sim.producer;
  opts.horizon_ms = c.analysis.horizon_ms;
  opts.ack_deadline_ms = c.broker.ack_deadline_ms;
  opts.pace = std::chrono::milliseconds(a.pace_ms);
  opts.serve_hub = !a.no_hub;
  spdlog::info("demo ready cycles={} seed={} stack_capacity={}", setup.scenario.cycles, setup.scenario.seed,
               setup.scenario.stack_capacity);
  const auto s = app::run_demo(setup.model, setup.rules, setup.scenario, opts);
  if (a.events) {
    for (const auto& e : s.events) record("{}", event_record(e));
  }
  record("demo cycles={} failures_injected={} faults_raised={} faults_cleared={} warnings_raised={} "
         "readings_published={} readings_processed={} duplicates_dropped={} frames_broadcast={} status_pushed={} "
         "status_received={} latency_p50_ms={:.3f} latency_p95_ms={:.3f} latency_max_ms={:.3f} elapsed_ms={:.1f} "
         "result={}",
         s.cycles, s.failures_injected, s.faults_raised, s.faults_cleared, s.warnings_raised, s.readings_published,
         s.readings_processed, s.duplicates_dropped, s.frames_broadcast, s.status_pushed, s.status_received,
         s.latency_p50_ms, s.latency_p95_ms, s.latency_max_ms, s.elapsed_ms, s.ok() ? "pass" : "fail");
  if (!s.error.empty()) {
    spdlog::error("{}", s.error);
    return kRuntimeFailure;
  }
  if (!s.ok()) {
    spdlog::error("faults raised ({}) differ from failures injected ({})", s.faults_raised, s.failures_injected);
    return kRuntimeFailure;
  }
  return kOk;
}

int cmd_bench_codec(const Globals& g, std::size_t points, std::size_t reps) {
  setup_logging(load_config(g).log_level);
  for (const auto& b : app::bench_codec(points, reps, g.seed.value_or(1))) {
    record("bench_codec codec={} points={} bytes={} reps={} encode_mb_s={:.1f} decode_mb_s={:.1f} aggregate_mb_s={:.1f}",
           b.codec, b.points, b.bytes, reps, b.encode_mb_s, b.decode_mb_s, b.aggregate_mb_s);
  }
  return kOk;
}

int cmd_bench_hub(const Globals& g, std::size_t clients, double fps, double seconds, std::size_t points) {
  setup_logging(load_config(g).log_level);
  const auto r = app::bench_hub(clients, fps, seconds, points, g.seed.value_or(1));
  for (const auto& c : r.clients) {
    record("bench_hub_client client={} frames={} fps={:.2f} p95_ms={:.3f} in_order={}", c.index, c.frames, c.fps,
           c.p95_ms, c.in_order);
  }
  record("bench_hub clients={} target_fps={} seconds={} points={} frame_bytes={} frames_sent={} p50_ms={:.3f} "
         "p95_ms={:.3f} max_ms={:.3f}",
         clients, fps, seconds, points, r.frame_bytes, r.frames_sent, r.p50_ms, r.p95_ms, r.max_ms);
  return kOk;
}

// Line and column (1-based) of a byte offset.
std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t offset) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(offset, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

int cmd_convert(const Globals& g, const std::string& in, const std::string& out, const std::string& to) {
  setup_logging(load_config(g).log_level);
  std::ifstream f(in, std::ios::binary);
  if (!f) {
    spdlog::error("cannot read '{}'", in);
    return kRuntimeFailure;
  }
  const std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const auto bytes = std::span(reinterpret_cast<const std::byte*>(data.data()), data.size());
  const bool from_binary = pointcloud::looks_binary(bytes);
  const std::string target = !to.empty() ? to : (fs::path(out).extension() == ".json" ? "json" : "binary");
  if (target != "json" && target != "binary") throw config::ConfigError(fmt::format("unknown format '{}'", target));

  pointcloud::PointCloudFrame frame;
  try {
    if (data.empty()) throw pointcloud::FormatError("empty input", 0);
    frame = from_binary ? pointcloud::decode_binary(bytes) : pointcloud::decode_json(data, 0);
  } catch (const pointcloud::FormatError& e) {
    if (from_binary || !e.offset()) {
      spdlog::error("{}: format error: {}", in, e.what());
    } else {
      const auto [line, col] = line_col(data, *e.offset());
      spdlog::error("{}:{}:{}: format error: {}", in, line, col, e.what());
    }
    return kRuntimeFailure;
  }

  std::string encoded;
  if (target == "binary") {
    if (from_binary) {
      encoded = data;  // already canonical; copy verbatim
    } else {
      const auto b = pointcloud::encode_binary(frame);
      encoded.assign(reinterpret_cast<const char*>(b.data()), b.size());
    }
  } else {
    encoded = pointcloud::encode_json(frame);
  }
  std::ofstream o(out, std::ios::binary | std::ios::trunc);
  if (!o || !o.write(encoded.data(), static_cast<std::streamsize>(encoded.size()))) {
    spdlog::error("cannot write '{}'", out);
    return kRuntimeFailure;
  }
  record("convert in={} out={} from={} to={} points={} bytes={}", in, out, from_binary ? "binary" : "json", target,
         frame.points.size(), encoded.size());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fabwatch: factory monitoring services, end-to-end demo and benchmarks"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "Service configuration file (YAML)");
  app.add_option("--seed", g.seed, "Seed for the simulator and benchmarks");
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, err, critical or off");

  std::function<int()> run;

  HubArgs hub_args;
  auto* hub = app.add_subcommand("hub", "Run the distribution hub");
  hub->add_option("--listen", hub_args.listen, "host:port");
  hub->add_option("--id", hub_args.id, "Hub id");
  hub->add_option("--peer", hub_args.peer, "host:port of a hub to link with");
  hub->add_option("--peer-id", hub_args.peer_id, "Id of that hub");
  hub->callback([&] { run = [&] { return cmd_hub(g, hub_args); }; });

  std::string broker_listen;
  auto* broker = app.add_subcommand("broker", "Run the reading broker");
  broker->add_option("--listen", broker_listen, "host:port");
  broker->callback([&] { run = [&] { return cmd_broker(g, broker_listen); }; });

  PeerArgs analysis_args;
  auto* analysis = app.add_subcommand("analysis", "Run the analysis engine against a broker and a hub");
  analysis->add_option("--broker", analysis_args.broker, "Broker host:port");
  analysis->add_option("--hub", analysis_args.hub, "Hub host:port");
  analysis->callback([&] { run = [&] { return cmd_analysis(g, analysis_args); }; });

  SimArgs sim_args;
  auto* simc = app.add_subcommand("sim", "Run the cap-transfer simulator against a broker and a hub");
  simc->add_option("--broker", sim_args.peers.broker, "Broker host:port");
  simc->add_option("--hub", sim_args.peers.hub, "Hub host:port");
  simc->add_option("--cycles", sim_args.cycles, "Override the scenario's cycle count");
  simc->add_flag("--no-frames", sim_args.no_frames, "Do not publish point-cloud frames");
  simc->callback([&] { run = [&] { return cmd_sim(g, sim_args); }; });

  DemoArgs demo_args;
  auto* demo = app.add_subcommand("demo", "Run broker, analysis, hub and simulator in one process");
  demo->add_option("--scenario", demo_args.scenario, "Scenario file (overrides the config)");
  demo->add_option("--pace-ms", demo_args.pace_ms, "Wall-clock pause between cycles");
  demo->add_flag("--events", demo_args.events, "Print every status event");
  demo->add_flag("--no-hub", demo_args.no_hub, "Skip the loopback hub server and AR client");
  demo->callback([&] { run = [&] { return cmd_demo(g, demo_args); }; });

  std::size_t codec_points = 100000, codec_reps = 20;
  auto* bc = app.add_subcommand("bench-codec", "Measure JSON and binary frame codec throughput");
  bc->add_option("--points", codec_points, "Points per frame")->capture_default_str();
  bc->add_option("--reps", codec_reps, "Repetitions")->capture_default_str()->check(CLI::PositiveNumber);
  bc->callback([&] { run = [&] { return cmd_bench_codec(g, codec_points, codec_reps); }; });

  std::size_t hub_clients = 4, hub_points = 100000;
  double hub_fps = 10, hub_seconds = 3;
  auto* bh = app.add_subcommand("bench-hub", "Measure frame relay rate and latency over loopback");
  bh->add_option("--clients", hub_clients, "Display clients")->capture_default_str()->check(CLI::PositiveNumber);
  bh->add_option("--fps", hub_fps, "Frames per second")->capture_default_str()->check(CLI::PositiveNumber);
  bh->add_option("--seconds", hub_seconds, "Duration")->capture_default_str()->check(CLI::PositiveNumber);
  bh->add_option("--points", hub_points, "Points per frame")->capture_default_str();
  bh->callback([&] { run = [&] { return cmd_bench_hub(g, hub_clients, hub_fps, hub_seconds, hub_points); }; });

  std::string conv_in, conv_out, conv_to;
  auto* conv = app.add_subcommand("convert", "Transcode a frame between JSON and binary");
  conv->add_option("input", conv_in, "Input frame")->required();
  conv->add_option("output", conv_out, "Output path")->required();
  conv->add_option("--to", conv_to, "json or binary (default: by output extension)");
  conv->callback([&] { run = [&] { return cmd_convert(g, conv_in, conv_out, conv_to); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    return run();
  } catch (const config::ConfigError& e) {
    std::cerr << "config-invalid: " << e.what() << std::endl;
    return kConfigError;
  } catch (const analysis::AnalysisError& e) {
    std::cerr << "config-invalid: " << e.what() << std::endl;
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config-invalid: " << e.what() << std::endl;
    return kConfigError;
  } catch (const net::NetError& e) {
    std::cerr << net::to_string(e.code()) << ": " << e.what() << std::endl;
    return kRuntimeFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kRuntimeFailure;
  }
}
