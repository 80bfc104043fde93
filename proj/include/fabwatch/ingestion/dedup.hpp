#pragma once

#include <bitset>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "fabwatch/ingestion/reading.hpp"

namespace fabwatch::ingestion {

inline constexpr std::uint64_t kDedupWindow = 1024;

struct DedupStats {
  std::uint64_t admitted = 0;
  std::uint64_t duplicates = 0;
  std::uint64_t stragglers = 0;  // older than the window, dropped unseen
};

// Consumer-side duplicate suppression over (producer, seq).
//
// Per producer we keep the highest seq admitted so far and a bitmap of which seqs in
// (high - kDedupWindow, high] were admitted. Anything at or below high - kDedupWindow is a
// straggler and dropped. Not thread-safe; one instance per consuming loop.
class DedupFilter {
 public:
  // True if the reading is new and should be processed.
  bool admit(const SensorReading& r);

  std::vector<SensorReading> filter(const std::vector<SensorReading>& in);

  [[nodiscard]] const DedupStats& stats() const noexcept { return stats_; }

 private:
  struct ProducerWindow {
    std::uint64_t high = 0;
    std::bitset<kDedupWindow> seen;  // indexed by seq % kDedupWindow
  };

  std::unordered_map<ProducerId, ProducerWindow> producers_;
  DedupStats stats_;
};

}  // namespace fabwatch::ingestion
