#pragma once

#include <compare>
#include <string>
#include <string_view>

namespace fabwatch::ingestion {

// Dot-separated, non-empty segments, no whitespace: "festo.captransfer.sensors".
[[nodiscard]] bool is_valid_topic(std::string_view s) noexcept;

class Topic {
 public:
  Topic() = default;
  explicit Topic(std::string name);  // throws IngestionError{invalid_topic}

  [[nodiscard]] const std::string& str() const noexcept { return name_; }

  friend auto operator<=>(const Topic&, const Topic&) = default;
  friend bool operator==(const Topic&, const Topic&) = default;

 private:
  std::string name_;
};

// Either an exact topic or a prefix followed by a single-level wildcard: "festo.*" matches
// "festo.caps" but neither "festo" nor "festo.caps.left".
class TopicPattern {
 public:
  TopicPattern() = default;
  explicit TopicPattern(std::string pattern);  // throws IngestionError{invalid_pattern}

  [[nodiscard]] bool matches(const Topic& topic) const noexcept;
  [[nodiscard]] const std::string& str() const noexcept { return pattern_; }
  [[nodiscard]] bool is_wildcard() const noexcept { return wildcard_; }

  friend bool operator==(const TopicPattern&, const TopicPattern&) = default;

 private:
  std::string pattern_;
  std::string prefix_;  // "festo." for "festo.*"
  bool wildcard_ = false;
};

}  // namespace fabwatch::ingestion
