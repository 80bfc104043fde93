#include "fabwatch/ingestion/topic.hpp"

#include <fmt/format.h>

#include "fabwatch/ingestion/errors.hpp"

namespace fabwatch::ingestion {

bool is_valid_topic(std::string_view s) noexcept {
  if (s.empty()) return false;
  bool segment_empty = true;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '*') return false;
    if (c == '.') {
      if (segment_empty) return false;
      segment_empty = true;
    } else {
      segment_empty = false;
    }
  }
  return !segment_empty;
}

Topic::Topic(std::string name) : name_(std::move(name)) {
  if (!is_valid_topic(name_)) {
    throw IngestionError(ErrorCode::invalid_topic, fmt::format("invalid topic '{}'", name_));
  }
}

TopicPattern::TopicPattern(std::string pattern) : pattern_(std::move(pattern)) {
  if (pattern_.size() >= 2 && pattern_.ends_with(".*")) {
    prefix_ = pattern_.substr(0, pattern_.size() - 1);
    wildcard_ = true;
    if (!is_valid_topic(std::string_view(prefix_).substr(0, prefix_.size() - 1))) {
      throw IngestionError(ErrorCode::invalid_pattern, fmt::format("invalid topic pattern '{}'", pattern_));
    }
  } else if (!is_valid_topic(pattern_)) {
    throw IngestionError(ErrorCode::invalid_pattern, fmt::format("invalid topic pattern '{}'", pattern_));
  }
}

bool TopicPattern::matches(const Topic& topic) const noexcept {
  const auto& t = topic.str();
  if (!wildcard_) return t == pattern_;
  if (!t.starts_with(prefix_) || t.size() == prefix_.size()) return false;
  return t.find('.', prefix_.size()) == std::string::npos;
}

}  // namespace fabwatch::ingestion
