#include "fabwatch/hub/protocol.hpp"

#include <nlohmann/json.hpp>

#include <fmt/format.h>

#include "fabwatch/pointcloud/codec.hpp"

namespace fabwatch::hub {

using nlohmann::json;

std::string_view to_string(MessageType t) noexcept {
  switch (t) {
    case MessageType::register_client: return "register";
    case MessageType::snapshot: return "snapshot";
    case MessageType::state_delta: return "state_delta";
    case MessageType::frame: return "frame";
    case MessageType::status: return "status";
    case MessageType::interaction: return "interaction";
    case MessageType::error: return "error";
  }
  return "?";
}

std::string_view to_string(FrameCodec c) noexcept { return c == FrameCodec::binary ? "binary" : "json"; }

std::string_view to_string(ClientRole r) noexcept {
  switch (r) {
    case ClientRole::display: return "display";
    case ClientRole::ar: return "ar";
    case ClientRole::peer: return "peer";
    case ClientRole::producer: return "producer";
  }
  return "?";
}

namespace {

[[noreturn]] void protocol_error(const std::string& what) { throw HubError(HubErrorCode::protocol, what); }

json point(const Point3& p) { return json::array({p.x, p.y, p.z}); }

Point3 point(const json& j) {
  if (!j.is_array() || j.size() != 3) protocol_error("point must be an array of 3 numbers");
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

json box(const Box3& b) { return {{"min", point(b.min)}, {"max", point(b.max)}}; }
Box3 box(const json& j) { return {point(j.at("min")), point(j.at("max"))}; }

json event_json(const StatusEvent& e) {
  return {{"rule_id", e.rule_id},
          {"component", e.component.str()},
          {"condition", analysis::to_string(e.condition)},
          {"severity", analysis::to_string(e.severity)},
          {"anchor", point(e.anchor)},
          {"timestamp_ms", e.timestamp_ms},
          {"message", e.message}};
}

StatusEvent event_from(const json& j) {
  StatusEvent e;
  e.rule_id = j.at("rule_id").get<std::string>();
  const auto comp = j.value("component", std::string{});
  if (!comp.empty()) e.component = spatial::ComponentId(comp);
  const auto cond = analysis::condition_from_string(j.at("condition").get<std::string>());
  const auto sev = analysis::severity_from_string(j.at("severity").get<std::string>());
  if (!cond || !sev) protocol_error("bad status condition or severity");
  e.condition = *cond;
  e.severity = *sev;
  e.anchor = point(j.at("anchor"));
  e.timestamp_ms = j.at("timestamp_ms").get<std::uint64_t>();
  e.message = j.value("message", std::string{});
  return e;
}

json state_json(const HubState& s) {
  json status = json::array();
  for (const auto& [_, e] : s.status) status.push_back(event_json(e));
  return {{"version", s.version},
          {"camera",
           {{"target", point(s.camera.target)},
            {"yaw", s.camera.yaw},
            {"pitch", s.camera.pitch},
            {"distance", s.camera.distance}}},
          {"measuring_box", box(s.measuring_box)},
          {"status", status}};
}

HubState state_from(const json& j) {
  HubState s;
  s.version = j.at("version").get<std::uint64_t>();
  const auto& c = j.at("camera");
  s.camera.target = point(c.at("target"));
  s.camera.yaw = c.at("yaw").get<double>();
  s.camera.pitch = c.at("pitch").get<double>();
  s.camera.distance = c.at("distance").get<double>();
  s.measuring_box = box(j.at("measuring_box"));
  for (const auto& e : j.at("status")) {
    auto ev = event_from(e);
    s.status[ev.rule_id] = std::move(ev);
  }
  return s;
}

json payload_json(const Payload& p) {
  json out = std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Orbit>) return {{"d_yaw", v.d_yaw}, {"d_pitch", v.d_pitch}};
        else if constexpr (std::is_same_v<T, Pan>) return {{"dx", v.dx}, {"dy", v.dy}};
        else if constexpr (std::is_same_v<T, Zoom>) return {{"factor", v.factor}};
        else if constexpr (std::is_same_v<T, SetBox>) return {{"box", box(v.box)}};
        else return {{"event", event_json(v.event)}};
      },
      p);
  out["kind"] = kind_name(p);
  return out;
}

Payload payload_from(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  Payload p;
  if (kind == "orbit") {
    p = Orbit{j.at("d_yaw").get<double>(), j.at("d_pitch").get<double>()};
  } else if (kind == "pan") {
    p = Pan{j.at("dx").get<double>(), j.at("dy").get<double>()};
  } else if (kind == "zoom") {
    p = Zoom{j.at("factor").get<double>()};
  } else if (kind == "set_box") {
    p = SetBox{box(j.at("box"))};
  } else if (kind == "status_update") {
    p = StatusUpdate{event_from(j.at("event"))};
  } else {
    throw HubError(HubErrorCode::invalid_payload, fmt::format("unknown interaction kind '{}'", kind));
  }
  validate_payload(p);
  return p;
}

std::string envelope(MessageType t, std::uint64_t version, json payload) {
  return json{{"type", to_string(t)}, {"version", version}, {"payload", std::move(payload)}}.dump();
}

MessageType type_from(const std::string& s) {
  for (auto t : {MessageType::register_client, MessageType::snapshot, MessageType::state_delta, MessageType::frame,
                 MessageType::status, MessageType::interaction, MessageType::error}) {
    if (to_string(t) == s) return t;
  }
  protocol_error(fmt::format("unknown message type '{}'", s));
}

RegisterRequest register_from(const json& j) {
  RegisterRequest r;
  const auto role = j.value("role", std::string{"display"});
  if (role == "display") r.role = ClientRole::display;
  else if (role == "ar") r.role = ClientRole::ar;
  else if (role == "peer") r.role = ClientRole::peer;
  else if (role == "producer") r.role = ClientRole::producer;
  else protocol_error(fmt::format("unknown role '{}'", role));
  r.wall_id = j.value("wall_id", std::string{"main"});
  if (j.contains("wall")) {
    const auto& w = j.at("wall");
    r.wall = {w.at("columns").get<std::uint32_t>(), w.at("rows").get<std::uint32_t>(),
              w.at("tile_width_px").get<std::uint32_t>(), w.at("tile_height_px").get<std::uint32_t>()};
  }
  if (j.contains("tile")) {
    r.tile.column = j.at("tile").at("column").get<std::uint32_t>();
    r.tile.row = j.at("tile").at("row").get<std::uint32_t>();
  }
  r.tile.client_id = j.value("client_id", std::string{});
  const auto codec = j.value("codec", std::string{"binary"});
  if (codec == "binary") r.codec = FrameCodec::binary;
  else if (codec == "json") r.codec = FrameCodec::json;
  else protocol_error(fmt::format("unknown codec '{}'", codec));
  r.hub_id = j.value("hub_id", std::string{});
  return r;
}

}  // namespace

std::string encode_register(const RegisterRequest& r) {
  json p{{"role", to_string(r.role)},
         {"wall_id", r.wall_id},
         {"wall",
          {{"columns", r.wall.columns},
           {"rows", r.wall.rows},
           {"tile_width_px", r.wall.tile_width_px},
           {"tile_height_px", r.wall.tile_height_px}}},
         {"tile", {{"column", r.tile.column}, {"row", r.tile.row}}},
         {"client_id", r.tile.client_id},
         {"codec", to_string(r.codec)}};
  if (!r.hub_id.empty()) p["hub_id"] = r.hub_id;
  return envelope(MessageType::register_client, 0, std::move(p));
}

std::string encode_snapshot(const SnapshotMessage& s) {
  json p{{"session", s.session}, {"state", state_json(s.state)}};
  if (s.viewport) {
    p["viewport"] = {{"x", s.viewport->x}, {"y", s.viewport->y}, {"width", s.viewport->width},
                     {"height", s.viewport->height}};
  }
  return envelope(MessageType::snapshot, s.state.version, std::move(p));
}

std::string encode_delta(const HubState& s) {
  return envelope(MessageType::state_delta, s.version, {{"state", state_json(s)}});
}

std::string encode_status(std::uint64_t version, const StatusEvent& e) {
  return envelope(MessageType::status, version, {{"event", event_json(e)}});
}

std::string encode_interaction(const InteractionMessage& i, std::uint64_t version) {
  json p = payload_json(i.payload);
  if (i.origin_hub) p["origin_hub"] = *i.origin_hub;
  if (i.origin_seq) p["origin_seq"] = *i.origin_seq;
  return envelope(MessageType::interaction, version, std::move(p));
}

std::string encode_interaction(const Interaction& i) {
  return encode_interaction(InteractionMessage{i.origin_hub, i.origin_seq, i.payload});
}

std::string encode_error(HubErrorCode code, std::string_view message) {
  return envelope(MessageType::error, 0, {{"code", to_string(code)}, {"message", message}});
}

std::string encode_json_frame(std::uint64_t version, const pointcloud::PointCloudFrame& f) {
  // Splice id and timestamp into the point document rather than re-encoding every point.
  const auto values = pointcloud::encode_json(f);
  return fmt::format(R"({{"type":"frame","version":{},"payload":{{"frame_id":{},"timestamp_ms":{},{}}})", version,
                     f.frame_id, f.timestamp_ms, std::string_view(values).substr(1));
}

Message parse_message(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    protocol_error(fmt::format("malformed envelope: {}", e.what()));
  }
  try {
    if (!j.is_object()) protocol_error("envelope must be an object");
    Message m{type_from(j.at("type").get<std::string>()), j.value("version", std::uint64_t{0}), {}};
    const json& p = j.at("payload");
    switch (m.type) {
      case MessageType::register_client:
        m.body = register_from(p);
        break;
      case MessageType::snapshot: {
        SnapshotMessage s{p.at("session").get<std::string>(), std::nullopt, state_from(p.at("state"))};
        if (p.contains("viewport")) {
          const auto& v = p.at("viewport");
          s.viewport = Viewport{v.at("x").get<std::uint64_t>(), v.at("y").get<std::uint64_t>(),
                                v.at("width").get<std::uint64_t>(), v.at("height").get<std::uint64_t>()};
        }
        m.body = std::move(s);
        break;
      }
      case MessageType::state_delta:
        m.body = DeltaMessage{state_from(p.at("state"))};
        break;
      case MessageType::frame: {
        auto f = pointcloud::decode_json(p.dump(), 0);
        f.frame_id = p.at("frame_id").get<std::uint64_t>();
        f.timestamp_ms = p.at("timestamp_ms").get<std::uint64_t>();
        m.body = std::move(f);
        break;
      }
      case MessageType::status:
        m.body = StatusMessage{event_from(p.at("event"))};
        break;
      case MessageType::interaction: {
        InteractionMessage i{std::nullopt, std::nullopt, payload_from(p)};
        if (p.contains("origin_hub")) i.origin_hub = p.at("origin_hub").get<std::string>();
        if (p.contains("origin_seq")) i.origin_seq = p.at("origin_seq").get<std::uint64_t>();
        m.body = std::move(i);
        break;
      }
      case MessageType::error:
        m.body = ErrorMessage{p.at("code").get<std::string>(), p.value("message", std::string{})};
        break;
    }
    return m;
  } catch (const json::exception& e) {
    protocol_error(fmt::format("bad envelope field: {}", e.what()));
  } catch (const std::invalid_argument& e) {
    protocol_error(e.what());
  } catch (const pointcloud::FormatError& e) {
    protocol_error(e.what());
  }
}

}  // namespace fabwatch::hub
