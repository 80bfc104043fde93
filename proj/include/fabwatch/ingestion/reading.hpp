#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>

#include "fabwatch/spatial/ids.hpp"

namespace fabwatch::ingestion {

using spatial::ProducerId;
using spatial::SensorId;

// Tagged sensor value. A given sensor always reports the same alternative.
using Value = std::variant<double, bool>;

struct SensorReading {
  ProducerId producer;
  std::uint64_t seq = 0;  // strictly increasing per producer
  SensorId sensor;
  Value value = 0.0;
  std::uint64_t timestamp_ms = 0;

  friend bool operator==(const SensorReading&, const SensorReading&) = default;
};

std::string to_string(const Value& v);

// Space-separated field=value pairs; a trailing "message=" field may contain spaces.
using Record = std::map<std::string, std::string, std::less<>>;

Record parse_record(std::string_view text);
std::string format_record(const Record& record);

// Adds producer/seq/sensor/type/value/ts fields.
void put_reading(Record& record, const SensorReading& r);
SensorReading get_reading(const Record& record);

// Throws std::invalid_argument when the field is missing or malformed.
std::uint64_t get_u64(const Record& record, std::string_view key);
const std::string& get_field(const Record& record, std::string_view key);

}  // namespace fabwatch::ingestion
