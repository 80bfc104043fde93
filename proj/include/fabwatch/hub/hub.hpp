#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "fabwatch/hub/protocol.hpp"

namespace fabwatch::hub {

// One encoded outbound message, shared between every session it is sent to.
struct OutMessage {
  MessageType type = MessageType::state_delta;
  std::uint64_t version = 0;
  bool binary = false;
  std::shared_ptr<const std::string> data;
  std::uint64_t frame_id = 0;  // frames only
};

// Transport endpoint of one session. send() is called with the hub lock held: it must queue
// and return without blocking or calling back into the hub. Returning false closes the session.
class ClientSink {
 public:
  virtual ~ClientSink() = default;
  virtual bool send(const OutMessage& m) = 0;
  virtual void close() {}
};

struct RegisterResult {
  std::string session;
  HubState state;
  std::optional<Viewport> viewport;
};

struct HubStats {
  std::uint64_t sessions_opened = 0;
  std::uint64_t sessions_closed = 0;
  std::uint64_t interactions_applied = 0;
  std::uint64_t duplicates_dropped = 0;
  std::uint64_t frames_relayed = 0;  // frames accepted for relay
  std::uint64_t frames_stale = 0;
  std::uint64_t frame_sends = 0;     // per-session deliveries
  std::uint64_t status_pushed = 0;
};

inline constexpr std::size_t kCheckpointInterval = 64;

/// Application state replication and frame relay for display walls, with one optional peer hub.
///
/// State is the fold of a canonically ordered interaction log over the initial state, so two
/// hubs holding the same set of interactions hold identical state. All operations serialize on
/// one mutex.
class Hub {
 public:
  explicit Hub(std::string hub_id, HubState initial = {});

  [[nodiscard]] const std::string& id() const noexcept { return id_; }

  // Sends the snapshot to `sink` before any other message. Peers get this hub's own log instead.
  // Throws HubError{invalid_tile} or HubError{duplicate_peer}.
  RegisterResult register_client(const RegisterRequest& req, std::shared_ptr<ClientSink> sink);
  void unregister(const std::string& session);

  // Outbound link to a peer hub; replays this hub's own interactions to it.
  std::string link_peer(const std::string& peer_hub_id, std::shared_ptr<ClientSink> sink);
  [[nodiscard]] bool has_peer() const;

  // Routes a parsed inbound message from `session`.
  void handle(const std::string& session, const Message& m);
  // An inbound EPC1 frame; relayed as received to binary clients. Throws pointcloud::FormatError.
  void handle_binary(const std::string& session, std::shared_ptr<const std::string> bytes);

  // A local interaction; tagged with this hub's id and the next origin sequence.
  HubState submit(const Payload& p);
  // Applies an interaction from any origin. False when its tag was already applied.
  bool apply_interaction(const Interaction& i);
  void push_status(const StatusEvent& e);

  // False when the frame is stale for `source`. Local frames are forwarded to the peer.
  // `encoded`, when given, must be the EPC1 encoding of `f`.
  bool broadcast_frame(const pointcloud::PointCloudFrame& f, const std::string& source = "local",
                       std::shared_ptr<const std::string> encoded = nullptr);

  [[nodiscard]] HubState state() const;
  [[nodiscard]] std::vector<Interaction> log() const;
  [[nodiscard]] HubStats stats() const;
  [[nodiscard]] std::size_t session_count() const;

 private:
  struct Session {
    RegisterRequest req;
    std::shared_ptr<ClientSink> sink;
  };

  void insert_locked(const Interaction& i);
  void send_locked(const std::string& session, const OutMessage& m, std::vector<std::string>& failed);
  void broadcast_locked(const OutMessage& m, bool displays_only, std::vector<std::string>& failed);
  void close_locked(const std::vector<std::string>& sessions);
  void remove_locked(const std::string& session);
  std::string link_peer_locked(const std::string& peer_hub_id, std::shared_ptr<ClientSink> sink);
  bool apply_locked(const Interaction& i);
  std::string frame_source(const std::string& session) const;
  static OutMessage text_message(MessageType t, std::uint64_t version, std::string text);

  mutable std::mutex mu_;
  std::string id_;
  HubState base_;
  HubState state_;
  std::vector<Interaction> log_;      // canonical order
  std::vector<HubState> checkpoints_;  // [k] = state after the first k * kCheckpointInterval entries
  std::set<std::pair<std::string, std::uint64_t>> tags_;
  std::uint64_t lamport_ = 0;

  std::map<std::string, Session> sessions_;
  std::map<std::tuple<std::string, std::uint32_t, std::uint32_t>, std::string> tiles_;  // (wall, col, row)
  std::map<std::string, WallConfig> walls_;
  std::string peer_session_;
  std::map<std::string, std::uint64_t> last_frame_;  // by source
  std::uint64_t next_session_ = 1;
  HubStats stats_;
};

}  // namespace fabwatch::hub
