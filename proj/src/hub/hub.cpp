#include "fabwatch/hub/hub.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "fabwatch/pointcloud/codec.hpp"

namespace fabwatch::hub {

namespace {

constexpr std::string_view kPeerSourcePrefix = "peer:";

}  // namespace

Hub::Hub(std::string hub_id, HubState initial)
    : id_(std::move(hub_id)), base_(initial), state_(initial), checkpoints_{initial} {
  if (id_.empty()) throw std::invalid_argument("hub id must not be empty");
}

OutMessage Hub::text_message(MessageType t, std::uint64_t version, std::string text) {
  return {t, version, false, std::make_shared<const std::string>(std::move(text)), 0};
}

RegisterResult Hub::register_client(const RegisterRequest& req, std::shared_ptr<ClientSink> sink) {
  std::lock_guard lock(mu_);
  if (req.role == ClientRole::peer) {
    if (req.hub_id.empty()) throw HubError(HubErrorCode::protocol, "peer registration without hub_id");
    return {link_peer_locked(req.hub_id, std::move(sink)), state_, std::nullopt};
  }

  std::optional<Viewport> viewport;
  std::vector<std::string> evicted;
  if (req.role == ClientRole::display) {
    viewport = viewport_for(req.wall, req.tile);
    auto wall = walls_.find(req.wall_id);
    if (wall != walls_.end() && !(wall->second == req.wall)) {
      throw HubError(HubErrorCode::invalid_tile,
                     fmt::format("wall '{}' is already registered with a different geometry", req.wall_id));
    }
    auto occupied = tiles_.find({req.wall_id, req.tile.column, req.tile.row});
    if (occupied != tiles_.end()) evicted.push_back(occupied->second);
  }
  close_locked(evicted);

  const auto session = fmt::format("s{}", next_session_++);
  RegisterResult result{session, state_, viewport};
  const auto snapshot = text_message(MessageType::snapshot, state_.version,
                                     encode_snapshot({session, viewport, state_}));
  if (!sink->send(snapshot)) {
    sink->close();
    throw HubError(HubErrorCode::protocol, "client closed before snapshot");
  }
  if (req.role == ClientRole::display) {
    walls_[req.wall_id] = req.wall;
    tiles_[{req.wall_id, req.tile.column, req.tile.row}] = session;
  }
  sessions_[session] = {req, std::move(sink)};
  ++stats_.sessions_opened;
  return result;
}

std::string Hub::link_peer(const std::string& peer_hub_id, std::shared_ptr<ClientSink> sink) {
  std::lock_guard lock(mu_);
  return link_peer_locked(peer_hub_id, std::move(sink));
}

std::string Hub::link_peer_locked(const std::string& peer_hub_id, std::shared_ptr<ClientSink> sink) {
  if (peer_hub_id == id_) throw HubError(HubErrorCode::protocol, "a hub cannot link to itself");
  if (!peer_session_.empty()) {
    throw HubError(HubErrorCode::duplicate_peer, fmt::format("hub '{}' already has a peer", id_));
  }
  const auto session = fmt::format("s{}", next_session_++);
  RegisterRequest req;
  req.role = ClientRole::peer;
  req.hub_id = peer_hub_id;
  sessions_[session] = {req, sink};
  peer_session_ = session;
  ++stats_.sessions_opened;

  // The peer may have missed anything issued here while unlinked; duplicates are dropped there.
  std::vector<std::string> failed;
  for (const auto& i : log_) {
    if (i.origin_hub != id_) continue;
    send_locked(session, text_message(MessageType::interaction, 0, encode_interaction(i)), failed);
    if (!failed.empty()) break;
  }
  close_locked(failed);
  return session;
}

bool Hub::has_peer() const {
  std::lock_guard lock(mu_);
  return !peer_session_.empty();
}

void Hub::unregister(const std::string& session) {
  std::lock_guard lock(mu_);
  remove_locked(session);
}

void Hub::remove_locked(const std::string& session) {
  auto it = sessions_.find(session);
  if (it == sessions_.end()) return;
  const auto& req = it->second.req;
  if (req.role == ClientRole::display) {
    auto tile = tiles_.find({req.wall_id, req.tile.column, req.tile.row});
    if (tile != tiles_.end() && tile->second == session) tiles_.erase(tile);
    const bool wall_in_use = std::any_of(tiles_.begin(), tiles_.end(),
                                         [&](const auto& t) { return std::get<0>(t.first) == req.wall_id; });
    if (!wall_in_use) walls_.erase(req.wall_id);
  }
  if (session == peer_session_) peer_session_.clear();
  sessions_.erase(it);
  ++stats_.sessions_closed;
}

void Hub::close_locked(const std::vector<std::string>& sessions) {
  for (const auto& s : sessions) {
    auto it = sessions_.find(s);
    if (it == sessions_.end()) continue;
    auto sink = it->second.sink;
    remove_locked(s);
    sink->close();
  }
}

void Hub::send_locked(const std::string& session, const OutMessage& m, std::vector<std::string>& failed) {
  auto it = sessions_.find(session);
  if (it == sessions_.end()) return;
  if (!it->second.sink->send(m)) failed.push_back(session);
}

void Hub::broadcast_locked(const OutMessage& m, bool displays_only, std::vector<std::string>& failed) {
  for (auto& [id, s] : sessions_) {
    if (s.req.role == ClientRole::peer || s.req.role == ClientRole::producer) continue;
    if (displays_only && s.req.role != ClientRole::display) continue;
    if (!s.sink->send(m)) failed.push_back(id);
  }
}

void Hub::insert_locked(const Interaction& i) {
  auto pos = std::upper_bound(log_.begin(), log_.end(), i, canonical_less);
  const auto idx = static_cast<std::size_t>(pos - log_.begin());
  log_.insert(pos, i);
  if (idx + 1 == log_.size()) {
    hub::apply(state_, i.payload);
  } else {
    // Landed before already-applied entries: refold from the last checkpoint at or before it.
    checkpoints_.resize(idx / kCheckpointInterval + 1);
    state_ = checkpoints_.back();
    for (std::size_t j = (checkpoints_.size() - 1) * kCheckpointInterval; j < log_.size(); ++j) {
      hub::apply(state_, log_[j].payload);
      if ((j + 1) % kCheckpointInterval == 0 && j + 1 < log_.size()) checkpoints_.push_back(state_);
    }
  }
  if (log_.size() % kCheckpointInterval == 0 && checkpoints_.size() * kCheckpointInterval == log_.size()) {
    checkpoints_.push_back(state_);
  }
}

bool Hub::apply_locked(const Interaction& i) {
  validate_payload(i.payload);
  if (!tags_.emplace(i.origin_hub, i.origin_seq).second) {
    ++stats_.duplicates_dropped;
    return false;
  }
  lamport_ = std::max(lamport_, i.origin_seq);
  insert_locked(i);
  ++stats_.interactions_applied;

  std::vector<std::string> failed;
  broadcast_locked(text_message(MessageType::state_delta, state_.version, encode_delta(state_)), false, failed);
  if (const auto* su = std::get_if<StatusUpdate>(&i.payload)) {
    const auto& current = state_.status.at(su->event.rule_id);
    broadcast_locked(text_message(MessageType::status, state_.version, encode_status(state_.version, current)),
                     false, failed);
  }
  if (i.origin_hub == id_ && !peer_session_.empty()) {
    send_locked(peer_session_, text_message(MessageType::interaction, 0, encode_interaction(i)), failed);
  }
  close_locked(failed);
  return true;
}

HubState Hub::submit(const Payload& p) {
  std::lock_guard lock(mu_);
  validate_payload(p);
  apply_locked({id_, lamport_ + 1, p});
  return state_;
}

bool Hub::apply_interaction(const Interaction& i) {
  std::lock_guard lock(mu_);
  return apply_locked(i);
}

void Hub::push_status(const StatusEvent& e) {
  std::lock_guard lock(mu_);
  apply_locked({id_, lamport_ + 1, StatusUpdate{e}});
  ++stats_.status_pushed;
}

bool Hub::broadcast_frame(const pointcloud::PointCloudFrame& f, const std::string& source,
                          std::shared_ptr<const std::string> encoded) {
  std::lock_guard lock(mu_);
  auto last = last_frame_.find(source);
  if (last != last_frame_.end() && f.frame_id <= last->second) {
    ++stats_.frames_stale;
    return false;
  }
  last_frame_[source] = f.frame_id;
  ++stats_.frames_relayed;

  std::optional<OutMessage> binary, text;
  if (encoded) binary = OutMessage{MessageType::frame, state_.version, true, std::move(encoded), f.frame_id};
  auto binary_message = [&]() -> const OutMessage& {
    if (!binary) {
      const auto bytes = pointcloud::encode_binary(f);
      binary = OutMessage{MessageType::frame, state_.version, true,
                          std::make_shared<const std::string>(reinterpret_cast<const char*>(bytes.data()),
                                                              bytes.size()),
                          f.frame_id};
    }
    return *binary;
  };
  std::vector<std::string> failed;
  for (auto& [id, s] : sessions_) {
    if (s.req.role != ClientRole::display) continue;
    const OutMessage* m = nullptr;
    if (s.req.codec == FrameCodec::binary) {
      m = &binary_message();
    } else {
      if (!text) {
        text = text_message(MessageType::frame, state_.version, encode_json_frame(state_.version, f));
        text->frame_id = f.frame_id;
      }
      m = &*text;
    }
    if (s.sink->send(*m)) {
      ++stats_.frame_sends;
    } else {
      failed.push_back(id);
    }
  }
  if (!source.starts_with(kPeerSourcePrefix) && !peer_session_.empty()) {
    send_locked(peer_session_, binary_message(), failed);
  }
  close_locked(failed);
  return true;
}

void Hub::handle(const std::string& session, const Message& m) {
  RegisterRequest req;
  {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(session);
    if (it == sessions_.end()) return;
    req = it->second.req;
  }
  const bool from_peer = req.role == ClientRole::peer;
  switch (m.type) {
    case MessageType::interaction: {
      const auto& i = std::get<InteractionMessage>(m.body);
      if (from_peer) {
        if (!i.origin_hub || !i.origin_seq) throw HubError(HubErrorCode::protocol, "peer interaction without tag");
        apply_interaction({*i.origin_hub, *i.origin_seq, i.payload});
      } else {
        submit(i.payload);
      }
      break;
    }
    case MessageType::frame:
      broadcast_frame(std::get<pointcloud::PointCloudFrame>(m.body), frame_source(session));
      break;
    case MessageType::status:
      push_status(std::get<StatusMessage>(m.body).event);
      break;
    case MessageType::snapshot:
    case MessageType::state_delta:
    case MessageType::error:
      break;  // peers receive our snapshot stream too; nothing to do with theirs
    case MessageType::register_client:
      throw HubError(HubErrorCode::protocol, "session is already registered");
  }
}

std::string Hub::frame_source(const std::string& session) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(session);
  if (it == sessions_.end()) return {};
  const auto& req = it->second.req;
  if (req.role == ClientRole::peer) return fmt::format("{}{}", kPeerSourcePrefix, req.hub_id);
  return req.tile.client_id.empty() ? session : req.tile.client_id;
}

void Hub::handle_binary(const std::string& session, std::shared_ptr<const std::string> bytes) {
  const auto* p = reinterpret_cast<const std::byte*>(bytes->data());
  const auto f = pointcloud::decode_binary(std::span(p, bytes->size()));
  const auto source = frame_source(session);
  if (source.empty()) return;
  broadcast_frame(f, source, std::move(bytes));
}

HubState Hub::state() const {
  std::lock_guard lock(mu_);
  return state_;
}

std::vector<Interaction> Hub::log() const {
  std::lock_guard lock(mu_);
  return log_;
}

HubStats Hub::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

std::size_t Hub::session_count() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

}  // namespace fabwatch::hub
