#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include "fabwatch/pointcloud/codec.hpp"
#include "support/process.hpp"

namespace {

namespace fs = std::filesystem;
using fabwatch::testing::Child;
using fabwatch::testing::run;
using Fields = std::map<std::string, std::string>;

const std::string kCli = FABWATCH_CLI_PATH;
const fs::path kSource = FABWATCH_SOURCE_DIR;

std::string src(const std::string& rel) { return (kSource / rel).string(); }

// Every stdout record whose first word is `kind`, as key=value maps.
std::vector<Fields> records(const std::string& out, const std::string& kind) {
  std::vector<Fields> all;
  std::istringstream lines(out);
  std::string line;
  while (std::getline(lines, line)) {
    std::istringstream words(line);
    std::string w;
    if (!(words >> w) || w != kind) continue;
    Fields f;
    while (words >> w) {
      const auto eq = w.find('=');
      if (eq != std::string::npos) f[w.substr(0, eq)] = w.substr(eq + 1);
    }
    all.push_back(std::move(f));
  }
  return all;
}

Fields record(const std::string& out, const std::string& kind) {
  const auto r = records(out, kind);
  EXPECT_EQ(r.size(), 1u) << out;
  return r.empty() ? Fields{} : r.front();
}

std::string bytes_of(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("fabwatch_cli_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir / name;
}

// Port from a "... listen=host:port ..." ready line.
int ready_port(const Child& c) {
  std::smatch m;
  const auto err = c.err();
  if (!std::regex_search(err, m, std::regex(R"(listen=[^:\s]+:(\d+))"))) return -1;
  return std::stoi(m[1]);
}

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run({kCli, "--help"}).code, 0);
  EXPECT_EQ(run({kCli}).code, 2);
  EXPECT_EQ(run({kCli, "frobnicate"}).code, 2);
  EXPECT_EQ(run({kCli, "bench-codec", "--reps", "0"}).code, 2);
}

TEST(Cli, MissingConfigFileIsAConfigError) {
  const auto r = run({kCli, "--config", "/nonexistent/fabwatch.yaml", "demo"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("config-invalid"), std::string::npos) << r.err;
}

TEST(Cli, BadLogLevelIsAConfigError) {
  EXPECT_EQ(run({kCli, "--log-level", "loud", "bench-codec", "--points", "0", "--reps", "1"}).code, 2);
}

TEST(CliDemo, FailureFreeRunRaisesNoFault) {
  const auto r = run({kCli, "--config", src("config/fabwatch.yaml"), "demo", "--scenario",
                      src("config/scenarios/failure_free.yaml")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto f = record(r.out, "demo");
  EXPECT_EQ(f.at("failures_injected"), "0");
  EXPECT_EQ(f.at("faults_raised"), "0");
  EXPECT_EQ(f.at("result"), "pass");
}

TEST(CliDemo, ScriptedFailureRaisesOneFault) {
  const auto r = run({kCli, "--config", src("config/fabwatch.yaml"), "demo", "--events"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto f = record(r.out, "demo");
  EXPECT_EQ(f.at("failures_injected"), "1");
  EXPECT_EQ(f.at("faults_raised"), "1");
  const auto events = records(r.out, "event");
  ASSERT_FALSE(events.empty());
  EXPECT_EQ(events.front().at("rule"), "cap_missing");
  EXPECT_EQ(events.front().at("condition"), "raised");
  // Every pushed status reached the AR client.
  EXPECT_EQ(f.at("status_received"), f.at("status_pushed"));
}

TEST(CliDemo, RuleOnUnboundSensorIsConfigInvalid) {
  const auto cfg = scratch("unbound.yaml");
  std::ofstream(cfg) << "rules: " << src("tests/data/unbound_rule.yaml") << "\n";
  const auto r = run({kCli, "--config", cfg.string(), "demo"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("oven_temp"), std::string::npos) << r.err;
}

TEST(CliDemo, SameSeedSameCounts) {
  const std::vector<std::string> argv{kCli, "--config", src("config/fabwatch.yaml"), "--seed", "99", "demo",
                                      "--scenario", src("config/scenarios/exhaustion.yaml"), "--events"};
  const auto a = run(argv), b = run(argv);
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  auto fa = record(a.out, "demo"), fb = record(b.out, "demo");
  for (auto* f : {&fa, &fb}) {
    for (const auto* k : {"latency_p50_ms", "latency_p95_ms", "latency_max_ms", "elapsed_ms"}) f->erase(k);
  }
  EXPECT_EQ(fa, fb);
  EXPECT_EQ(records(a.out, "event"), records(b.out, "event"));

  // A different seed changes the failure pattern.
  auto other = argv;
  other[4] = "100";
  const auto c = run(other);
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_NE(records(a.out, "event"), records(c.out, "event"));
}

TEST(CliDemo, PrecedenceFlagOverEnvOverFile) {
  const auto cfg = src("config/fabwatch.yaml");  // scripted scenario
  const auto env = run({kCli, "--config", cfg, "demo"},
                       {"FABWATCH_SCENARIO=" + src("config/scenarios/failure_free.yaml")});
  ASSERT_EQ(env.code, 0) << env.err;
  EXPECT_EQ(record(env.out, "demo").at("failures_injected"), "0");

  const auto flag = run({kCli, "--config", cfg, "demo", "--scenario", src("config/scenarios/scripted.yaml")},
                        {"FABWATCH_SCENARIO=" + src("config/scenarios/failure_free.yaml")});
  ASSERT_EQ(flag.code, 0) << flag.err;
  EXPECT_EQ(record(flag.out, "demo").at("failures_injected"), "1");

  EXPECT_EQ(run({kCli, "demo"}, {"FABWATCH_RULES=" + src("tests/data/unbound_rule.yaml")}).code, 2);
}

TEST(CliBench, CodecWithZeroPointsReportsHeaderOnlySizes) {
  const auto r = run({kCli, "bench-codec", "--points", "0", "--reps", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = records(r.out, "bench_codec");
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& f : rows) {
    EXPECT_EQ(f.at("points"), "0");
    if (f.at("codec") == "binary") EXPECT_EQ(f.at("bytes"), std::to_string(fabwatch::pointcloud::kBinaryHeaderSize));
    if (f.at("codec") == "json") EXPECT_EQ(f.at("bytes"), std::to_string(std::string(R"({"values": []})").size()));
  }
}

TEST(CliBench, BinaryIsSmallerThanJsonAtOneHundredThousandPoints) {
  const auto r = run({kCli, "bench-codec", "--points", "100000", "--reps", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::map<std::string, std::size_t> bytes;
  for (const auto& f : records(r.out, "bench_codec")) bytes[f.at("codec")] = std::stoul(f.at("bytes"));
  ASSERT_EQ(bytes.size(), 2u);
  EXPECT_EQ(bytes["binary"], fabwatch::pointcloud::kBinaryHeaderSize + 12 * 100000u);
  EXPECT_LT(bytes["binary"], bytes["json"]);
}

TEST(CliBench, HubSingleClientKeepsUp) {
  const auto r = run({kCli, "bench-hub", "--clients", "1", "--fps", "10", "--seconds", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto clients = records(r.out, "bench_hub_client");
  ASSERT_EQ(clients.size(), 1u);
  EXPECT_GE(std::stod(clients[0].at("fps")), 10.0);
  EXPECT_EQ(clients[0].at("in_order"), "true");
  EXPECT_EQ(record(r.out, "bench_hub").at("frames_sent"), "20");
}

TEST(CliConvert, SampleFrameRoundTripsThroughBinary) {
  const auto bin = scratch("sample.epc"), json = scratch("sample.json");
  auto r = run({kCli, "convert", src("tests/data/sample_frame.json"), bin.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(record(r.out, "convert").at("points"), "6");
  EXPECT_EQ(fs::file_size(bin), fabwatch::pointcloud::kBinaryHeaderSize + 6 * 12);

  r = run({kCli, "convert", bin.string(), json.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(record(r.out, "convert").at("from"), "binary");
  const auto text = bytes_of(json);
  const auto back = fabwatch::pointcloud::decode_json(text, 0);
  ASSERT_EQ(back.points.size(), 6u);
  EXPECT_FLOAT_EQ(static_cast<float>(back.points[1].y), 3.1f);
  EXPECT_EQ(back.points[5].x, 0.5);
}

TEST(CliConvert, BinaryToBinaryIsByteIdentical) {
  const auto a = scratch("a.epc"), b = scratch("b.epc");
  ASSERT_EQ(run({kCli, "convert", src("tests/data/sample_frame.json"), a.string()}).code, 0);
  const auto r = run({kCli, "convert", a.string(), b.string(), "--to", "binary"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(bytes_of(a), bytes_of(b));
}

TEST(CliConvert, EmptyFileIsAFormatErrorWithPosition) {
  const auto r = run({kCli, "convert", src("tests/data/empty_frame.json"), scratch("out.epc").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("empty_frame.json:1:1: format error"), std::string::npos) << r.err;
}

TEST(CliConvert, MalformedJsonReportsLineAndColumn) {
  const auto in = scratch("broken.json");
  std::ofstream(in) << "{\"values\": [\n  \"1 2 3\",\n  ";
  const auto r = run({kCli, "convert", in.string(), scratch("out.epc").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("broken.json:3:3: format error"), std::string::npos) << r.err;
}

TEST(CliConvert, UnknownTargetAndMissingInput) {
  EXPECT_EQ(run({kCli, "convert", src("tests/data/sample_frame.json"), "/tmp/x", "--to", "xml"}).code, 2);
  EXPECT_EQ(run({kCli, "convert", "/nonexistent.json", scratch("x.epc").string()}).code, 1);
}

TEST(CliServices, HubReadyThenSecondHubOnSamePortFails) {
  Child first({kCli, "hub", "--listen", "127.0.0.1:0", "--id", "hub-x"});
  ASSERT_TRUE(first.wait_for_err("hub ready")) << first.err();
  const int port = ready_port(first);
  ASSERT_GT(port, 0) << first.err();

  const auto second = run({kCli, "hub", "--listen", "127.0.0.1:" + std::to_string(port)});
  EXPECT_EQ(second.code, 1);
  EXPECT_NE(second.err.find("port-in-use"), std::string::npos) << second.err;

  first.signal(SIGINT);
  EXPECT_EQ(first.wait(std::chrono::seconds(10)), 0);
  EXPECT_EQ(record(first.out(), "hub").at("id"), "hub-x");
}

TEST(CliServices, SeparateProcessesDetectScriptedFailure) {
  Child hub({kCli, "hub", "--listen", "127.0.0.1:0"});
  Child broker({kCli, "broker", "--listen", "127.0.0.1:0"});
  ASSERT_TRUE(hub.wait_for_err("hub ready")) << hub.err();
  ASSERT_TRUE(broker.wait_for_err("broker ready")) << broker.err();
  const auto hub_ep = "127.0.0.1:" + std::to_string(ready_port(hub));
  const auto broker_ep = "127.0.0.1:" + std::to_string(ready_port(broker));

  const auto cfg = src("config/fabwatch.yaml");
  Child analysis({kCli, "--config", cfg, "analysis", "--broker", broker_ep, "--hub", hub_ep});
  ASSERT_TRUE(analysis.wait_for_err("analysis ready")) << analysis.err();

  const auto sim = run({kCli, "--config", cfg, "sim", "--broker", broker_ep, "--hub", hub_ep},
                       {"FABWATCH_LOG_LEVEL=warn"});
  ASSERT_EQ(sim.code, 0) << sim.err;
  const auto s = record(sim.out, "sim");
  EXPECT_EQ(s.at("failures_injected"), "1");
  EXPECT_EQ(s.at("readings_published"), "150");

  EXPECT_TRUE(analysis.wait_for_err("status rule=cap_missing condition=raised")) << analysis.err();
  analysis.signal(SIGINT);
  ASSERT_EQ(analysis.wait(std::chrono::seconds(10)), 0) << analysis.err();
  const auto a = record(analysis.out(), "analysis");
  EXPECT_EQ(a.at("raised"), "1");
  EXPECT_EQ(a.at("duplicates"), "0");

  hub.signal(SIGINT);
  broker.signal(SIGINT);
  ASSERT_EQ(hub.wait(std::chrono::seconds(10)), 0);
  ASSERT_EQ(broker.wait(std::chrono::seconds(10)), 0);
  const auto h = record(hub.out(), "hub");
  EXPECT_GE(std::stoul(h.at("status_pushed")), 1u);
  EXPECT_EQ(h.at("frames_relayed"), s.at("frames_broadcast"));
  EXPECT_EQ(record(broker.out(), "broker").at("published"), "150");
}

}  // namespace
