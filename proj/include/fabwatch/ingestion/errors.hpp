#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fabwatch::ingestion {

enum class ErrorCode {
  broker_unavailable,  // retryable
  invalid_topic,
  invalid_pattern,
  unknown_offset,
  unknown_consumer,
  protocol,
};

std::string_view to_string(ErrorCode code) noexcept;
ErrorCode error_code_from_string(std::string_view s);

class IngestionError : public std::runtime_error {
 public:
  IngestionError(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }
  [[nodiscard]] bool retryable() const noexcept { return code_ == ErrorCode::broker_unavailable; }

 private:
  ErrorCode code_;
};

}  // namespace fabwatch::ingestion
