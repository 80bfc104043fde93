#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>

#include <fmt/format.h>

#include "fabwatch/pointcloud/codec.hpp"

namespace fabwatch::pointcloud {

namespace {

constexpr std::array<char, 4> kMagic{'E', 'P', 'C', '1'};

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<std::byte, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  } else {
    return v;
  }
}

class Writer {
 public:
  explicit Writer(std::vector<std::byte>& out) : out_(out) {}

  template <typename T>
  void put(T v) {
    v = to_little(v);
    const auto at = out_.size();
    out_.resize(at + sizeof(T));
    std::memcpy(out_.data() + at, &v, sizeof(T));
  }

 private:
  std::vector<std::byte>& out_;
};

template <typename T>
T read_at(std::span<const std::byte> bytes, std::size_t at) {
  T v;
  std::memcpy(&v, bytes.data() + at, sizeof(T));
  return to_little(v);
}

}  // namespace

bool looks_binary(std::span<const std::byte> bytes) noexcept {
  return bytes.size() >= kMagic.size() && std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) == 0;
}

std::vector<std::byte> encode_binary(const PointCloudFrame& frame) {
  const std::size_t n = frame.points.size();
  if (n > UINT32_MAX) throw std::length_error("frame has more points than EPC1 can encode");
  const bool colored = frame.colors.has_value();
  if (colored && frame.colors->size() != n) throw std::invalid_argument("colors length differs from points length");

  std::vector<std::byte> out;
  out.reserve(kBinaryHeaderSize + n * 12 + (colored ? n * 3 : 0));
  out.resize(kMagic.size());
  std::memcpy(out.data(), kMagic.data(), kMagic.size());

  Writer w(out);
  w.put<std::uint64_t>(frame.frame_id);
  w.put<std::uint64_t>(frame.timestamp_ms);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(n));
  w.put<std::uint8_t>(colored ? 1 : 0);

  const std::size_t base = out.size();
  out.resize(base + n * 12);
  std::byte* dst = out.data() + base;
  for (const auto& p : frame.points) {
    const std::array<float, 3> xyz{to_little(static_cast<float>(p.x)), to_little(static_cast<float>(p.y)),
                                   to_little(static_cast<float>(p.z))};
    std::memcpy(dst, xyz.data(), 12);
    dst += 12;
  }
  if (colored) {
    for (const auto& c : *frame.colors) {
      out.push_back(std::byte{c.r});
      out.push_back(std::byte{c.g});
      out.push_back(std::byte{c.b});
    }
  }
  return out;
}

PointCloudFrame decode_binary(std::span<const std::byte> bytes) {
  if (bytes.size() < kMagic.size()) throw FormatError("truncated EPC1 payload: missing magic", bytes.size());
  if (!looks_binary(bytes)) throw FormatError("bad magic: expected \"EPC1\"", 0);
  if (bytes.size() < kBinaryHeaderSize) throw FormatError("truncated EPC1 payload: incomplete header", bytes.size());

  PointCloudFrame frame;
  frame.frame_id = read_at<std::uint64_t>(bytes, 4);
  frame.timestamp_ms = read_at<std::uint64_t>(bytes, 12);
  const std::size_t n = read_at<std::uint32_t>(bytes, 20);
  const auto flag = read_at<std::uint8_t>(bytes, 24);
  if (flag > 1) throw FormatError(fmt::format("invalid color flag {}", flag), 24);

  const std::size_t expected = kBinaryHeaderSize + n * 12 + (flag ? n * 3 : 0);
  if (bytes.size() < expected) {
    throw FormatError(fmt::format("truncated EPC1 payload: {} points need {} bytes, got {}", n, expected, bytes.size()),
                      bytes.size());
  }
  if (bytes.size() > expected) {
    throw FormatError(fmt::format("EPC1 length mismatch: {} points need {} bytes, got {}", n, expected, bytes.size()),
                      expected);
  }

  frame.points.resize(n);
  const std::byte* src = bytes.data() + kBinaryHeaderSize;
  for (std::size_t i = 0; i < n; ++i, src += 12) {
    std::array<float, 3> xyz;
    std::memcpy(xyz.data(), src, 12);
    auto& p = frame.points[i];
    p = {to_little(xyz[0]), to_little(xyz[1]), to_little(xyz[2])};
    if (!p.is_finite()) throw FormatError(fmt::format("point {} is not finite", i), kBinaryHeaderSize + i * 12);
  }
  if (flag) {
    std::vector<Rgb> colors(n);
    for (std::size_t i = 0; i < n; ++i, src += 3) {
      colors[i] = {std::to_integer<std::uint8_t>(src[0]), std::to_integer<std::uint8_t>(src[1]),
                   std::to_integer<std::uint8_t>(src[2])};
    }
    frame.colors = std::move(colors);
  }
  return frame;
}

}  // namespace fabwatch::pointcloud
