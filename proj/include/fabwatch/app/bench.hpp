#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fabwatch::app {

struct CodecBench {
  std::string codec;  // "binary" or "json"
  std::size_t points = 0;
  std::size_t bytes = 0;  // encoded size of one frame
  double encode_mb_s = 0;
  double decode_mb_s = 0;
  double aggregate_mb_s = 0;  // encoded bytes produced plus consumed, over encode plus decode time
};

// Encodes and decodes one random frame `reps` times in each format.
std::vector<CodecBench> bench_codec(std::size_t points, std::size_t reps, std::uint64_t seed = 1);

struct HubBenchClient {
  std::size_t index = 0;
  std::uint64_t frames = 0;
  double fps = 0;
  double p95_ms = 0;
  bool in_order = true;
};

struct HubBench {
  std::vector<HubBenchClient> clients;
  std::uint64_t frames_sent = 0;
  std::size_t frame_bytes = 0;
  double seconds = 0;
  double p50_ms = 0;
  double p95_ms = 0;  // over every delivery to every client
  double max_ms = 0;
};

/// Producer and display clients against a hub served on loopback. The producer sends a
/// `points`-point binary frame at `fps` for `seconds`; latency runs from the producer's send call
/// to the client's decoded receipt.
HubBench bench_hub(std::size_t clients, double fps, double seconds, std::size_t points, std::uint64_t seed = 1);

}  // namespace fabwatch::app
