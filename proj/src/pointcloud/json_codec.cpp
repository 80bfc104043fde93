#include <array>
#include <charconv>
#include <chrono>
#include <cmath>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "fabwatch/pointcloud/codec.hpp"

namespace fabwatch::pointcloud {

namespace {

// Shortest decimal (no exponent) that parses back to the same double.
void append_number(std::string& out, double v) {
  std::array<char, 400> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed);
  if (res.ec != std::errc{}) {
    // Fixed notation of a huge finite double may exceed the buffer; shortest general form still round-trips.
    res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  }
  out.append(buf.data(), res.ptr);
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

Point3 parse_entry(std::string_view s, std::size_t index) {
  std::array<double, 3> xyz{};
  std::size_t n = 0;
  std::size_t i = 0;
  while (true) {
    while (i < s.size() && is_space(s[i])) ++i;
    if (i == s.size()) break;
    std::size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    const std::string_view tok = s.substr(i, j - i);
    if (n == 3) {
      throw FormatError(fmt::format("values[{}]: expected exactly 3 numeric tokens, got more in \"{}\"", index, s));
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
      throw FormatError(fmt::format("values[{}]: token \"{}\" is not a number", index, tok));
    }
    if (!std::isfinite(v)) {
      throw FormatError(fmt::format("values[{}]: token \"{}\" is not finite", index, tok));
    }
    xyz[n++] = v;
    i = j;
  }
  if (n != 3) {
    throw FormatError(fmt::format("values[{}]: expected exactly 3 numeric tokens, got {} in \"{}\"", index, n, s));
  }
  return {xyz[0], xyz[1], xyz[2]};
}

// Streams the document without building a DOM. Only the top-level "values" array is interpreted.
class FrameSax : public nlohmann::json_sax<nlohmann::json> {
 public:
  explicit FrameSax(std::vector<Point3>& points) : points_(points) {}

  bool null() override { return scalar("null"); }
  bool boolean(bool) override { return scalar("boolean"); }
  bool number_integer(number_integer_t) override { return scalar("number"); }
  bool number_unsigned(number_unsigned_t) override { return scalar("number"); }
  bool number_float(number_float_t, const string_t&) override { return scalar("number"); }
  bool binary(binary_t&) override { return scalar("binary"); }

  bool string(string_t& val) override {
    if (depth_ == 0) throw FormatError("top-level JSON value must be an object");
    if (pending_values_) throw FormatError("\"values\" must be an array, got string");
    if (in_values_ && depth_ == 2) {
      points_.push_back(parse_entry(val, points_.size()));
    }
    pending_values_ = false;
    return true;
  }

  bool start_object(std::size_t) override {
    if (in_values_ && depth_ == 2) bad_entry("object");
    if (pending_values_) throw FormatError("\"values\" must be an array, got object");
    ++depth_;
    return true;
  }

  bool key(string_t& val) override {
    pending_values_ = depth_ == 1 && val == "values";
    return true;
  }

  bool end_object() override {
    --depth_;
    return true;
  }

  bool start_array(std::size_t) override {
    if (depth_ == 0) throw FormatError("top-level JSON value must be an object");
    if (in_values_ && depth_ == 2) bad_entry("array");
    if (pending_values_) {
      in_values_ = true;
      seen_values_ = true;
      points_.clear();
    }
    pending_values_ = false;
    ++depth_;
    return true;
  }

  bool end_array() override {
    --depth_;
    if (in_values_ && depth_ == 1) in_values_ = false;
    return true;
  }

  bool parse_error(std::size_t position, const std::string&, const nlohmann::detail::exception& ex) override {
    throw FormatError(fmt::format("malformed JSON: {}", ex.what()), position);
  }

  [[nodiscard]] bool seen_values() const noexcept { return seen_values_; }

 private:
  bool scalar(const char* kind) {
    if (depth_ == 0) throw FormatError("top-level JSON value must be an object");
    if (in_values_ && depth_ == 2) bad_entry(kind);
    if (pending_values_) throw FormatError(fmt::format("\"values\" must be an array, got {}", kind));
    return true;
  }

  [[noreturn]] void bad_entry(const char* kind) const {
    throw FormatError(fmt::format("values[{}]: expected a string, got {}", points_.size(), kind));
  }

  std::vector<Point3>& points_;
  int depth_ = 0;
  bool pending_values_ = false;
  bool in_values_ = false;
  bool seen_values_ = false;
};

}  // namespace

std::uint64_t now_ms() {
  using namespace std::chrono;
  return static_cast<std::uint64_t>(duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count());
}

std::string encode_json(const PointCloudFrame& frame) {
  std::string out;
  out.reserve(16 + frame.points.size() * 24);
  out += "{\"values\": [";
  for (std::size_t i = 0; i < frame.points.size(); ++i) {
    if (i != 0) out += ',';
    const auto& p = frame.points[i];
    out += '"';
    append_number(out, p.x);
    out += ' ';
    append_number(out, p.y);
    out += ' ';
    append_number(out, p.z);
    out += '"';
  }
  out += "]}";
  return out;
}

PointCloudFrame decode_json(std::string_view text, std::uint64_t receipt_time_ms) {
  PointCloudFrame frame;
  frame.timestamp_ms = receipt_time_ms;
  FrameSax sax(frame.points);
  nlohmann::json::sax_parse(text.begin(), text.end(), &sax);
  if (!sax.seen_values()) throw FormatError("missing \"values\" array");
  return frame;
}

PointCloudFrame decode_json(std::string_view text) { return decode_json(text, now_ms()); }

}  // namespace fabwatch::pointcloud
