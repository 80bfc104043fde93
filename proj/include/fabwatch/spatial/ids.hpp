#pragma once

#include <compare>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fabwatch::spatial {

// Non-empty, case-sensitive, no whitespace.
[[nodiscard]] bool is_valid_identifier(std::string_view s) noexcept;

class InvalidIdentifier : public std::invalid_argument {
 public:
  explicit InvalidIdentifier(std::string_view value);
};

/// Opaque string identifier, distinct per Tag so component and sensor ids cannot be mixed up.
template <typename Tag>
class Identifier {
 public:
  Identifier() = default;

  explicit Identifier(std::string value) : value_(std::move(value)) {
    if (!is_valid_identifier(value_)) throw InvalidIdentifier(value_);
  }

  [[nodiscard]] const std::string& str() const noexcept { return value_; }
  [[nodiscard]] bool empty() const noexcept { return value_.empty(); }

  friend auto operator<=>(const Identifier&, const Identifier&) = default;
  friend bool operator==(const Identifier&, const Identifier&) = default;

 private:
  std::string value_;
};

struct ComponentTag {};
struct SensorTag {};
struct ProducerTag {};

using ComponentId = Identifier<ComponentTag>;
using SensorId = Identifier<SensorTag>;
using ProducerId = Identifier<ProducerTag>;

}  // namespace fabwatch::spatial

template <typename Tag>
struct std::hash<fabwatch::spatial::Identifier<Tag>> {
  std::size_t operator()(const fabwatch::spatial::Identifier<Tag>& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};
