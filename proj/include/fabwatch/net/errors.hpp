#pragma once

#include <stdexcept>
#include <string>

namespace fabwatch::net {

enum class NetErrorCode { port_in_use, unreachable, closed, timeout, rejected };

[[nodiscard]] inline const char* to_string(NetErrorCode c) noexcept {
  switch (c) {
    case NetErrorCode::port_in_use: return "port-in-use";
    case NetErrorCode::unreachable: return "unreachable";
    case NetErrorCode::closed: return "closed";
    case NetErrorCode::timeout: return "timeout";
    case NetErrorCode::rejected: return "rejected";
  }
  return "unknown";
}

class NetError : public std::runtime_error {
 public:
  NetError(NetErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  [[nodiscard]] NetErrorCode code() const noexcept { return code_; }

 private:
  NetErrorCode code_;
};

}  // namespace fabwatch::net
