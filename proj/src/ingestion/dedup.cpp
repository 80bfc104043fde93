#include "fabwatch/ingestion/dedup.hpp"

namespace fabwatch::ingestion {

bool DedupFilter::admit(const SensorReading& r) {
  auto [it, fresh] = producers_.try_emplace(r.producer);
  ProducerWindow& w = it->second;
  const std::size_t slot = r.seq % kDedupWindow;

  if (fresh) {
    w.high = r.seq;
    w.seen.set(slot);
    ++stats_.admitted;
    return true;
  }

  if (r.seq > w.high) {
    // Slide forward, forgetting the slots that now belong to new seqs.
    const std::uint64_t advance = r.seq - w.high;
    if (advance >= kDedupWindow) {
      w.seen.reset();
    } else {
      for (std::uint64_t s = w.high + 1; s <= r.seq; ++s) w.seen.reset(s % kDedupWindow);
    }
    w.high = r.seq;
    w.seen.set(slot);
    ++stats_.admitted;
    return true;
  }

  if (w.high - r.seq >= kDedupWindow) {
    ++stats_.stragglers;
    return false;
  }
  if (w.seen.test(slot)) {
    ++stats_.duplicates;
    return false;
  }
  w.seen.set(slot);
  ++stats_.admitted;
  return true;
}

std::vector<SensorReading> DedupFilter::filter(const std::vector<SensorReading>& in) {
  std::vector<SensorReading> out;
  out.reserve(in.size());
  for (const auto& r : in) {
    if (admit(r)) out.push_back(r);
  }
  return out;
}

}  // namespace fabwatch::ingestion
