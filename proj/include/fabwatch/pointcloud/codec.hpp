#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fabwatch/pointcloud/frame.hpp"

namespace fabwatch::pointcloud {

// JSON wire format: {"values": ["x y z", ...]}. Carries neither ids, timestamps nor colors;
// colors on an encoded frame are dropped.
[[nodiscard]] std::string encode_json(const PointCloudFrame& frame);

// Unknown keys are ignored. The decoded frame gets frame_id 0 and `receipt_time_ms`.
[[nodiscard]] PointCloudFrame decode_json(std::string_view text, std::uint64_t receipt_time_ms);
[[nodiscard]] PointCloudFrame decode_json(std::string_view text);  // receipt time = now

// Binary "EPC1" layout, little-endian:
//   magic "EPC1" | frame_id u64 | timestamp u64 | count u32 | color flag u8 |
//   count * (x, y, z) f32 | if flagged: count * (r, g, b) u8
inline constexpr std::size_t kBinaryHeaderSize = 4 + 8 + 8 + 4 + 1;

[[nodiscard]] std::vector<std::byte> encode_binary(const PointCloudFrame& frame);
[[nodiscard]] PointCloudFrame decode_binary(std::span<const std::byte> bytes);

// True when the buffer starts with the EPC1 magic.
[[nodiscard]] bool looks_binary(std::span<const std::byte> bytes) noexcept;

std::uint64_t now_ms();

}  // namespace fabwatch::pointcloud
