#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fabwatch/ingestion/broker.hpp"

namespace fabwatch::ingestion::wire {

// Envelope: u32 little-endian length of everything after it, u8 kind, body.
// Bodies are text records (see parse_record).
enum class Kind : std::uint8_t {
  publish = 1,
  deliver = 2,
  ack = 3,
  subscribe = 4,
  receipt = 5,  // broker -> publisher, carries the assigned offset
  error = 6,
};

inline constexpr std::size_t kMaxEnvelope = 1u << 20;

struct Envelope {
  Kind kind;
  std::string body;

  friend bool operator==(const Envelope&, const Envelope&) = default;
};

std::vector<std::byte> encode(const Envelope& e);

// Incremental decoder for a byte stream. Throws IngestionError{protocol} on oversized or
// unknown-kind envelopes.
class EnvelopeReader {
 public:
  void feed(std::span<const std::byte> bytes);
  std::optional<Envelope> next();

 private:
  std::vector<std::byte> buf_;
  std::size_t pos_ = 0;
};

Envelope publish_envelope(const Topic& topic, const SensorReading& r);
Envelope deliver_envelope(const Delivery& d);
Envelope ack_envelope(const Topic& topic, Offset offset);
Envelope subscribe_envelope(const Subscription& sub);
Envelope receipt_envelope(const Topic& topic, Offset offset);
Envelope error_envelope(ErrorCode code, std::string_view message);

struct PublishRequest {
  Topic topic;
  SensorReading reading;
};

PublishRequest parse_publish(const Envelope& e);
Delivery parse_deliver(const Envelope& e);
std::pair<Topic, Offset> parse_ack(const Envelope& e);
Subscription parse_subscribe(const Envelope& e);
Offset parse_receipt(const Envelope& e);
IngestionError parse_error(const Envelope& e);

}  // namespace fabwatch::ingestion::wire
