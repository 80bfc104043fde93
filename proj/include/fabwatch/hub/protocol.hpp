#pragma once

// Client protocol: JSON text envelopes {"type", "version", "payload"}. Point-cloud frames go
// either as raw EPC1 binary messages or as a "frame" text envelope whose payload is the JSON
// point format plus frame_id and timestamp_ms.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "fabwatch/hub/state.hpp"
#include "fabwatch/pointcloud/frame.hpp"

namespace fabwatch::hub {

enum class MessageType { register_client, snapshot, state_delta, frame, status, interaction, error };
enum class FrameCodec { binary, json };
// producer: publishes frames or status and receives only its snapshot.
enum class ClientRole { display, ar, peer, producer };

std::string_view to_string(MessageType t) noexcept;
std::string_view to_string(FrameCodec c) noexcept;
std::string_view to_string(ClientRole r) noexcept;

struct RegisterRequest {
  ClientRole role = ClientRole::display;
  std::string wall_id = "main";
  WallConfig wall;
  TileAssignment tile;
  FrameCodec codec = FrameCodec::binary;
  std::string hub_id;  // peers only

  friend bool operator==(const RegisterRequest&, const RegisterRequest&) = default;
};

struct SnapshotMessage {
  std::string session;
  std::optional<Viewport> viewport;  // absent for non-display roles
  HubState state;

  friend bool operator==(const SnapshotMessage&, const SnapshotMessage&) = default;
};

struct DeltaMessage {
  HubState state;
  friend bool operator==(const DeltaMessage&, const DeltaMessage&) = default;
};

struct StatusMessage {
  StatusEvent event;
  friend bool operator==(const StatusMessage&, const StatusMessage&) = default;
};

struct ErrorMessage {
  std::string code;
  std::string message;
  friend bool operator==(const ErrorMessage&, const ErrorMessage&) = default;
};

// Interactions from display clients carry no origin tag; the hub assigns one.
struct InteractionMessage {
  std::optional<std::string> origin_hub;
  std::optional<std::uint64_t> origin_seq;
  Payload payload;

  friend bool operator==(const InteractionMessage&, const InteractionMessage&) = default;
};

using MessageBody = std::variant<RegisterRequest, SnapshotMessage, DeltaMessage, pointcloud::PointCloudFrame,
                                 StatusMessage, InteractionMessage, ErrorMessage>;

struct Message {
  MessageType type;
  std::uint64_t version = 0;
  MessageBody body;
};

std::string encode_register(const RegisterRequest& r);
std::string encode_snapshot(const SnapshotMessage& s);
std::string encode_delta(const HubState& s);
std::string encode_status(std::uint64_t version, const StatusEvent& e);
std::string encode_interaction(const InteractionMessage& i, std::uint64_t version = 0);
std::string encode_interaction(const Interaction& i);
std::string encode_error(HubErrorCode code, std::string_view message);
std::string encode_json_frame(std::uint64_t version, const pointcloud::PointCloudFrame& f);

// Throws HubError{protocol} on malformed envelopes, HubError{invalid_payload} on bad payload values.
Message parse_message(std::string_view text);

}  // namespace fabwatch::hub
