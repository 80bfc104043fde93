#include "fabwatch/ingestion/wire.hpp"

#include <cstring>

#include <fmt/format.h>

namespace fabwatch::ingestion::wire {

namespace {

Record body_of(const Envelope& e, Kind expected) {
  if (e.kind != expected) {
    throw IngestionError(ErrorCode::protocol, fmt::format("expected envelope kind {}, got {}",
                                                          static_cast<int>(expected), static_cast<int>(e.kind)));
  }
  try {
    return parse_record(e.body);
  } catch (const std::invalid_argument& ex) {
    throw IngestionError(ErrorCode::protocol, ex.what());
  }
}

// Field errors inside a well-framed envelope are protocol errors, except a bad topic, which
// keeps its own code so a publisher can tell it apart.
template <typename F>
auto guarded(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const IngestionError&) {
    throw;
  } catch (const std::exception& ex) {
    throw IngestionError(ErrorCode::protocol, ex.what());
  }
}

bool valid_kind(std::uint8_t k) { return k >= 1 && k <= 6; }

}  // namespace

std::vector<std::byte> encode(const Envelope& e) {
  const std::uint32_t len = static_cast<std::uint32_t>(1 + e.body.size());
  std::vector<std::byte> out(4 + len);
  for (int i = 0; i < 4; ++i) out[i] = static_cast<std::byte>((len >> (8 * i)) & 0xFF);
  out[4] = static_cast<std::byte>(e.kind);
  std::memcpy(out.data() + 5, e.body.data(), e.body.size());
  return out;
}

void EnvelopeReader::feed(std::span<const std::byte> bytes) {
  if (pos_ > 0 && pos_ == buf_.size()) {
    buf_.clear();
    pos_ = 0;
  }
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

std::optional<Envelope> EnvelopeReader::next() {
  const std::size_t avail = buf_.size() - pos_;
  if (avail < 4) return std::nullopt;
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= std::to_integer<std::uint32_t>(buf_[pos_ + i]) << (8 * i);
  if (len == 0 || len > kMaxEnvelope) {
    throw IngestionError(ErrorCode::protocol, fmt::format("envelope length {} out of range", len));
  }
  if (avail < 4 + std::size_t{len}) return std::nullopt;
  const auto kind = std::to_integer<std::uint8_t>(buf_[pos_ + 4]);
  if (!valid_kind(kind)) throw IngestionError(ErrorCode::protocol, fmt::format("unknown envelope kind {}", kind));
  Envelope e{static_cast<Kind>(kind), std::string(reinterpret_cast<const char*>(buf_.data() + pos_ + 5), len - 1)};
  pos_ += 4 + len;
  if (pos_ > 64 * 1024 && pos_ * 2 > buf_.size()) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(pos_));
    pos_ = 0;
  }
  return e;
}

Envelope publish_envelope(const Topic& topic, const SensorReading& r) {
  Record rec;
  rec["topic"] = topic.str();
  put_reading(rec, r);
  return {Kind::publish, format_record(rec)};
}

Envelope deliver_envelope(const Delivery& d) {
  Record rec;
  rec["topic"] = d.topic.str();
  rec["offset"] = std::to_string(d.offset);
  rec["attempt"] = std::to_string(d.attempt);
  put_reading(rec, d.reading);
  return {Kind::deliver, format_record(rec)};
}

Envelope ack_envelope(const Topic& topic, Offset offset) {
  Record rec;
  rec["topic"] = topic.str();
  rec["offset"] = std::to_string(offset);
  return {Kind::ack, format_record(rec)};
}

Envelope subscribe_envelope(const Subscription& sub) {
  Record rec;
  rec["pattern"] = sub.pattern.str();
  rec["consumer"] = sub.consumer;
  rec["deadline_ms"] = std::to_string(sub.ack_deadline_ms);
  return {Kind::subscribe, format_record(rec)};
}

Envelope receipt_envelope(const Topic& topic, Offset offset) {
  Record rec;
  rec["topic"] = topic.str();
  rec["offset"] = std::to_string(offset);
  return {Kind::receipt, format_record(rec)};
}

Envelope error_envelope(ErrorCode code, std::string_view message) {
  Record rec;
  rec["code"] = std::string(to_string(code));
  rec["message"] = std::string(message);
  return {Kind::error, format_record(rec)};
}

PublishRequest parse_publish(const Envelope& e) {
  const auto rec = body_of(e, Kind::publish);
  return guarded([&] { return PublishRequest{Topic(get_field(rec, "topic")), get_reading(rec)}; });
}

Delivery parse_deliver(const Envelope& e) {
  const auto rec = body_of(e, Kind::deliver);
  return guarded([&] {
    return Delivery{Topic(get_field(rec, "topic")), get_u64(rec, "offset"),
                    get_reading(rec), static_cast<std::uint32_t>(get_u64(rec, "attempt"))};
  });
}

std::pair<Topic, Offset> parse_ack(const Envelope& e) {
  const auto rec = body_of(e, Kind::ack);
  return guarded([&] { return std::pair{Topic(get_field(rec, "topic")), get_u64(rec, "offset")}; });
}

Subscription parse_subscribe(const Envelope& e) {
  const auto rec = body_of(e, Kind::subscribe);
  return guarded([&] {
    return Subscription{TopicPattern(get_field(rec, "pattern")), get_field(rec, "consumer"),
                        get_u64(rec, "deadline_ms")};
  });
}

Offset parse_receipt(const Envelope& e) {
  const auto rec = body_of(e, Kind::receipt);
  return guarded([&] { return get_u64(rec, "offset"); });
}

IngestionError parse_error(const Envelope& e) {
  const auto rec = body_of(e, Kind::error);
  auto code = rec.find("code");
  auto msg = rec.find("message");
  return IngestionError(code == rec.end() ? ErrorCode::protocol : error_code_from_string(code->second),
                        msg == rec.end() ? std::string("remote error") : msg->second);
}

}  // namespace fabwatch::ingestion::wire
