#include "fabwatch/ingestion/reading.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "fabwatch/ingestion/errors.hpp"

namespace fabwatch::ingestion {

namespace {

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw std::invalid_argument(fmt::format("'{}' is not a finite number", s));
  }
  return v;
}

}  // namespace

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::broker_unavailable: return "broker-unavailable";
    case ErrorCode::invalid_topic: return "invalid-topic";
    case ErrorCode::invalid_pattern: return "invalid-pattern";
    case ErrorCode::unknown_offset: return "unknown-offset";
    case ErrorCode::unknown_consumer: return "unknown-consumer";
    case ErrorCode::protocol: return "protocol";
  }
  return "protocol";
}

ErrorCode error_code_from_string(std::string_view s) {
  for (auto c : {ErrorCode::broker_unavailable, ErrorCode::invalid_topic, ErrorCode::invalid_pattern,
                 ErrorCode::unknown_offset, ErrorCode::unknown_consumer, ErrorCode::protocol}) {
    if (to_string(c) == s) return c;
  }
  return ErrorCode::protocol;
}

std::string to_string(const Value& v) {
  if (const bool* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
  return format_double(std::get<double>(v));
}

Record parse_record(std::string_view text) {
  Record out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\n')) ++i;
    if (i == text.size()) break;
    const auto eq = text.find('=', i);
    if (eq == std::string_view::npos) {
      throw std::invalid_argument(fmt::format("record field without '=' at offset {}", i));
    }
    const auto key = text.substr(i, eq - i);
    if (key.empty() || key.find(' ') != std::string_view::npos) {
      throw std::invalid_argument(fmt::format("malformed record key at offset {}", i));
    }
    std::size_t end = key == "message" ? text.size() : text.find_first_of(" \n", eq + 1);
    if (end == std::string_view::npos) end = text.size();
    out.insert_or_assign(std::string(key), std::string(text.substr(eq + 1, end - eq - 1)));
    i = end;
  }
  return out;
}

std::string format_record(const Record& record) {
  std::string out;
  const std::string* message = nullptr;
  for (const auto& [k, v] : record) {
    if (k == "message") {
      message = &v;
      continue;
    }
    if (!out.empty()) out += ' ';
    out += k;
    out += '=';
    out += v;
  }
  if (message != nullptr) {
    if (!out.empty()) out += ' ';
    out += "message=";
    out += *message;
  }
  return out;
}

const std::string& get_field(const Record& record, std::string_view key) {
  auto it = record.find(key);
  if (it == record.end()) throw std::invalid_argument(fmt::format("record is missing field '{}'", key));
  return it->second;
}

std::uint64_t get_u64(const Record& record, std::string_view key) {
  const auto& s = get_field(record, key);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw std::invalid_argument(fmt::format("field '{}'='{}' is not an unsigned integer", key, s));
  }
  return v;
}

void put_reading(Record& record, const SensorReading& r) {
  record["producer"] = r.producer.str();
  record["seq"] = std::to_string(r.seq);
  record["sensor"] = r.sensor.str();
  record["type"] = std::holds_alternative<bool>(r.value) ? "bool" : "real";
  record["value"] = to_string(r.value);
  record["ts"] = std::to_string(r.timestamp_ms);
}

SensorReading get_reading(const Record& record) {
  SensorReading r;
  r.producer = ProducerId(get_field(record, "producer"));
  r.seq = get_u64(record, "seq");
  r.sensor = SensorId(get_field(record, "sensor"));
  const auto& type = get_field(record, "type");
  const auto& value = get_field(record, "value");
  if (type == "bool") {
    if (value == "true") {
      r.value = true;
    } else if (value == "false") {
      r.value = false;
    } else {
      throw std::invalid_argument(fmt::format("'{}' is not a boolean", value));
    }
  } else if (type == "real") {
    r.value = parse_double(value);
  } else {
    throw std::invalid_argument(fmt::format("unknown value type '{}'", type));
  }
  r.timestamp_ms = get_u64(record, "ts");
  return r;
}

}  // namespace fabwatch::ingestion
