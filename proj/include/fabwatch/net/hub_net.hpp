#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "fabwatch/hub/hub.hpp"
#include "fabwatch/net/errors.hpp"

namespace fabwatch::net {

struct HubServerOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;  // 0 picks a free port
  std::size_t send_queue = 256;
};

/// Serves the hub protocol over websocket. The first message of a connection must be a register
/// envelope; text messages carry JSON envelopes and binary messages carry EPC1 frames.
class HubServer {
 public:
  // Binds immediately; throws NetError{port_in_use}.
  HubServer(hub::Hub& hub, const HubServerOptions& opts);
  ~HubServer();
  HubServer(const HubServer&) = delete;
  HubServer& operator=(const HubServer&) = delete;

  [[nodiscard]] std::uint16_t port() const noexcept;
  // Stops accepting, flushes and closes every connection.
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct PeerLinkOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  std::string peer_id;
  std::chrono::milliseconds retry{1000};
  std::size_t send_queue = 1024;
};

/// Dials a peer hub, registers as its peer and links `hub` to it; reconnects after a drop.
class PeerLink {
 public:
  PeerLink(hub::Hub& hub, const PeerLinkOptions& opts);
  ~PeerLink();
  PeerLink(const PeerLink&) = delete;
  PeerLink& operator=(const PeerLink&) = delete;

  [[nodiscard]] bool connected() const;
  [[nodiscard]] std::uint64_t connects() const;
  // Waits until linked or the timeout passes.
  bool wait_connected(std::chrono::milliseconds timeout) const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Protocol client for tests, benchmarks and producer services.
class HubClient {
 public:
  // Called on the client's I/O thread with every message after the snapshot.
  // `bytes` is the wire size of the message.
  using Handler = std::function<void(const hub::Message& m, std::size_t bytes)>;

  // Connects, registers and waits for the snapshot. Without a handler, messages queue for next().
  // Throws NetError{unreachable, rejected, timeout}.
  HubClient(const std::string& host, std::uint16_t port, const hub::RegisterRequest& req, Handler handler = {},
            std::chrono::milliseconds timeout = std::chrono::seconds(5));
  ~HubClient();
  HubClient(const HubClient&) = delete;
  HubClient& operator=(const HubClient&) = delete;

  [[nodiscard]] const hub::SnapshotMessage& snapshot() const;

  void send_text(std::string text);
  void send_binary(std::string bytes);
  void send_frame(const pointcloud::PointCloudFrame& f);  // binary
  void send_status(const analysis::StatusEvent& e);
  void send_interaction(const hub::Payload& p);

  std::optional<hub::Message> next(std::chrono::milliseconds timeout);
  [[nodiscard]] bool closed() const;
  // Waits until every queued outbound message has been written.
  bool flush(std::chrono::milliseconds timeout);
  void close();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace fabwatch::net
