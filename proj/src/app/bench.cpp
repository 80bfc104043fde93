#include "fabwatch/app/bench.hpp"

#include <algorithm>
#include <chrono>
#include <mutex>
#include <random>
#include <stdexcept>
#include <thread>

#include "fabwatch/app/demo.hpp"
#include "fabwatch/hub/hub.hpp"
#include "fabwatch/net/hub_net.hpp"
#include "fabwatch/pointcloud/codec.hpp"

namespace fabwatch::app {

using Clock = std::chrono::steady_clock;

namespace {

pointcloud::PointCloudFrame random_cloud(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> xy(-2.0, 2.0), z(0.5, 4.5);
  pointcloud::PointCloudFrame f;
  f.frame_id = 1;
  f.timestamp_ms = 1;
  f.points.resize(n);
  for (auto& p : f.points) p = {xy(rng), xy(rng), z(rng)};
  return f;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

double mb_s(std::size_t bytes, std::size_t reps, double secs) {
  return secs > 0 ? static_cast<double>(bytes) * static_cast<double>(reps) / secs / 1e6 : 0.0;
}

// Keeps the optimizer from discarding a result.
volatile std::size_t g_sink = 0;

}  // namespace

std::vector<CodecBench> bench_codec(std::size_t points, std::size_t reps, std::uint64_t seed) {
  if (reps == 0) throw std::invalid_argument("reps must be positive");
  const auto frame = random_cloud(points, seed);
  std::vector<CodecBench> out;

  {
    CodecBench b{"binary", points};
    std::vector<std::byte> enc;
    auto t = Clock::now();
    for (std::size_t i = 0; i < reps; ++i) {
      enc = pointcloud::encode_binary(frame);
      g_sink = g_sink + enc.size();
    }
    const double te = seconds_since(t);
    t = Clock::now();
    for (std::size_t i = 0; i < reps; ++i) g_sink = g_sink + pointcloud::decode_binary(enc).points.size();
    const double td = seconds_since(t);
    b.bytes = enc.size();
    b.encode_mb_s = mb_s(b.bytes, reps, te);
    b.decode_mb_s = mb_s(b.bytes, reps, td);
    b.aggregate_mb_s = mb_s(2 * b.bytes, reps, te + td);
    out.push_back(b);
  }
  {
    CodecBench b{"json", points};
    std::string enc;
    auto t = Clock::now();
    for (std::size_t i = 0; i < reps; ++i) {
      enc = pointcloud::encode_json(frame);
      g_sink = g_sink + enc.size();
    }
    const double te = seconds_since(t);
    t = Clock::now();
    for (std::size_t i = 0; i < reps; ++i) g_sink = g_sink + pointcloud::decode_json(enc, 0).points.size();
    const double td = seconds_since(t);
    b.bytes = enc.size();
    b.encode_mb_s = mb_s(b.bytes, reps, te);
    b.decode_mb_s = mb_s(b.bytes, reps, td);
    b.aggregate_mb_s = mb_s(2 * b.bytes, reps, te + td);
    out.push_back(b);
  }
  return out;
}

HubBench bench_hub(std::size_t clients, double fps, double seconds, std::size_t points, std::uint64_t seed) {
  if (clients == 0 || !(fps > 0) || !(seconds > 0)) throw std::invalid_argument("clients, fps and seconds must be positive");
  hub::Hub h("bench");
  net::HubServer server(h, {"127.0.0.1", 0, 1024});

  struct Track {
    std::mutex mu;
    std::vector<double> latencies;
    std::uint64_t last_id = 0;
    bool in_order = true;
  };
  std::vector<Track> tracks(clients);
  std::mutex sent_mu;
  std::vector<Clock::time_point> sent_at;  // by frame_id - 1

  std::vector<std::unique_ptr<net::HubClient>> viewers;
  for (std::size_t i = 0; i < clients; ++i) {
    hub::RegisterRequest req;
    req.role = hub::ClientRole::display;
    req.wall = {static_cast<std::uint32_t>(clients), 1, 1920, 1080};
    req.tile = {"tile" + std::to_string(i), static_cast<std::uint32_t>(i), 0};
    auto& track = tracks[i];
    viewers.push_back(std::make_unique<net::HubClient>(
        "127.0.0.1", server.port(), req, [&track, &sent_mu, &sent_at](const hub::Message& m, std::size_t) {
          if (m.type != hub::MessageType::frame) return;
          const auto now = Clock::now();
          const auto id = std::get<pointcloud::PointCloudFrame>(m.body).frame_id;
          Clock::time_point t0;
          {
            std::lock_guard lock(sent_mu);
            t0 = sent_at.at(id - 1);
          }
          std::lock_guard lock(track.mu);
          if (id <= track.last_id) track.in_order = false;
          track.last_id = id;
          track.latencies.push_back(std::chrono::duration<double, std::milli>(now - t0).count());
        }));
  }
  hub::RegisterRequest preq;
  preq.role = hub::ClientRole::producer;
  net::HubClient producer("127.0.0.1", server.port(), preq);

  auto frame = random_cloud(points, seed);
  HubBench r;
  r.frames_sent = static_cast<std::uint64_t>(std::llround(fps * seconds));
  r.frame_bytes = pointcloud::kBinaryHeaderSize + 12 * points;
  r.seconds = seconds;
  {
    std::lock_guard lock(sent_mu);
    sent_at.resize(r.frames_sent);
  }
  const auto start = Clock::now();
  const auto period = std::chrono::duration<double>(1.0 / fps);
  for (std::uint64_t i = 0; i < r.frames_sent; ++i) {
    std::this_thread::sleep_until(start + std::chrono::duration_cast<Clock::duration>(period * static_cast<double>(i)));
    frame.frame_id = i + 1;
    frame.timestamp_ms = i + 1;
    {
      std::lock_guard lock(sent_mu);
      sent_at[i] = Clock::now();
    }
    producer.send_frame(frame);
  }
  // Let the last frames drain.
  const auto deadline = Clock::now() + std::chrono::seconds(3);
  auto all_in = [&] {
    for (auto& t : tracks) {
      std::lock_guard lock(t.mu);
      if (t.latencies.size() < r.frames_sent) return false;
    }
    return true;
  };
  while (!all_in() && Clock::now() < deadline) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  producer.close();
  for (auto& v : viewers) v->close();
  server.stop();

  std::vector<double> all;
  for (std::size_t i = 0; i < clients; ++i) {
    auto& t = tracks[i];
    std::lock_guard lock(t.mu);
    HubBenchClient c;
    c.index = i;
    c.frames = t.latencies.size();
    c.fps = static_cast<double>(c.frames) / seconds;
    c.p95_ms = percentile(t.latencies, 95);
    c.in_order = t.in_order;
    r.clients.push_back(c);
    all.insert(all.end(), t.latencies.begin(), t.latencies.end());
  }
  r.p50_ms = percentile(all, 50);
  r.p95_ms = percentile(all, 95);
  r.max_ms = all.empty() ? 0 : *std::max_element(all.begin(), all.end());
  return r;
}

}  // namespace fabwatch::app
