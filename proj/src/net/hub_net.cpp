#include "fabwatch/net/hub_net.hpp"

#include <atomic>
#include <condition_variable>
#include <deque>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "fabwatch/pointcloud/codec.hpp"
#include "ws_connection.hpp"

namespace fabwatch::net {

using detail::WsConnection;
namespace asio = detail::asio;
namespace beast = detail::beast;
namespace websocket = detail::websocket;
using detail::tcp;

namespace {

class ConnSink : public hub::ClientSink {
 public:
  explicit ConnSink(std::weak_ptr<WsConnection> conn) : conn_(std::move(conn)) {}
  bool send(const hub::OutMessage& m) override {
    auto c = conn_.lock();
    return c && c->send(m.data, m.binary);
  }
  void close() override {
    if (auto c = conn_.lock()) c->close();
  }

 private:
  std::weak_ptr<WsConnection> conn_;
};

std::shared_ptr<const std::string> shared_text(std::string s) {
  return std::make_shared<const std::string>(std::move(s));
}

hub::Message decode(const std::string& data, bool binary) {
  if (binary) {
    const auto* p = reinterpret_cast<const std::byte*>(data.data());
    return {hub::MessageType::frame, 0, pointcloud::decode_binary(std::span(p, data.size()))};
  }
  return hub::parse_message(data);
}

tcp::endpoint resolve(asio::io_context& ioc, const std::string& host, std::uint16_t port) {
  tcp::resolver resolver(ioc);
  beast::error_code ec;
  auto results = resolver.resolve(host, std::to_string(port), ec);
  if (ec || results.empty()) {
    throw NetError(NetErrorCode::unreachable, fmt::format("cannot resolve {}: {}", host, ec.message()));
  }
  return *results.begin();
}

// Connects and completes the client handshake synchronously.
WsConnection::Stream dial(asio::io_context& ioc, const std::string& host, std::uint16_t port) {
  WsConnection::Stream ws(ioc);
  beast::error_code ec;
  beast::get_lowest_layer(ws).socket().connect(resolve(ioc, host, port), ec);
  if (ec) throw NetError(NetErrorCode::unreachable, fmt::format("cannot connect to {}:{}: {}", host, port, ec.message()));
  beast::get_lowest_layer(ws).socket().set_option(tcp::no_delay(true));
  ws.read_message_max(detail::kMaxMessageBytes);
  ws.handshake(fmt::format("{}:{}", host, port), "/", ec);
  if (ec) throw NetError(NetErrorCode::unreachable, fmt::format("websocket handshake with {}:{} failed: {}", host, port, ec.message()));
  return ws;
}

std::string error_envelope(const std::exception& e) {
  if (const auto* h = dynamic_cast<const hub::HubError*>(&e)) return hub::encode_error(h->code(), h->what());
  if (dynamic_cast<const pointcloud::FormatError*>(&e)) return hub::encode_error(hub::HubErrorCode::invalid_payload, e.what());
  return hub::encode_error(hub::HubErrorCode::protocol, e.what());
}

}  // namespace

// ---------------------------------------------------------------------------------------------

struct HubServer::Impl {
  struct Session {
    std::shared_ptr<WsConnection> conn;
    std::shared_ptr<ConnSink> sink;
    std::string id;
  };

  hub::Hub& hub;
  HubServerOptions opts;
  asio::io_context ioc{1};
  tcp::acceptor acceptor{ioc};
  std::thread thread;
  std::mutex mu;
  std::condition_variable cv;
  std::set<std::shared_ptr<Session>> sessions;
  bool stopped = false;

  Impl(hub::Hub& h, const HubServerOptions& o) : hub(h), opts(o) {
    const auto ep = resolve(ioc, opts.host, opts.port);
    beast::error_code ec;
    acceptor.open(ep.protocol(), ec);
    if (!ec) acceptor.set_option(asio::socket_base::reuse_address(true), ec);
    if (!ec) acceptor.bind(ep, ec);
    if (!ec) acceptor.listen(asio::socket_base::max_listen_connections, ec);
    if (ec) {
      const auto code = ec == asio::error::address_in_use ? NetErrorCode::port_in_use : NetErrorCode::unreachable;
      throw NetError(code, fmt::format("cannot listen on {}:{}: {}", opts.host, opts.port, ec.message()));
    }
    accept();
    thread = std::thread([this] { ioc.run(); });
  }

  void accept() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;  // acceptor closed
      socket.set_option(tcp::no_delay(true), ec);
      auto s = std::make_shared<Session>();
      s->conn = std::make_shared<WsConnection>(WsConnection::Stream(std::move(socket)), opts.send_queue);
      s->sink = std::make_shared<ConnSink>(s->conn);
      {
        std::lock_guard lock(mu);
        sessions.insert(s);
      }
      s->conn->accept([this, s](beast::error_code aec) {
        if (aec) return drop(s);
        s->conn->start([this, s](std::string&& data, bool binary) { on_message(*s, std::move(data), binary); },
                       [this, s] { drop(s); });
      });
      accept();
    });
  }

  void on_message(Session& s, std::string&& data, bool binary) {
    try {
      if (s.id.empty()) {
        if (binary) throw hub::HubError(hub::HubErrorCode::protocol, "expected a register message");
        const auto m = hub::parse_message(data);
        if (m.type != hub::MessageType::register_client) {
          throw hub::HubError(hub::HubErrorCode::protocol, "expected a register message");
        }
        s.id = hub.register_client(std::get<hub::RegisterRequest>(m.body), s.sink).session;
        return;
      }
      if (binary) {
        hub.handle_binary(s.id, std::make_shared<const std::string>(std::move(data)));
      } else {
        hub.handle(s.id, hub::parse_message(data));
      }
    } catch (const std::exception& e) {
      s.conn->send(shared_text(error_envelope(e)), false);
      if (s.id.empty()) s.conn->close();
    }
  }

  void drop(const std::shared_ptr<Session>& s) {
    if (!s->id.empty()) hub.unregister(s->id);
    std::lock_guard lock(mu);
    sessions.erase(s);
    cv.notify_all();
  }

  void stop() {
    std::vector<std::shared_ptr<Session>> open;
    {
      std::lock_guard lock(mu);
      if (stopped) return;
      stopped = true;
      open.assign(sessions.begin(), sessions.end());
    }
    asio::post(ioc, [this] {
      beast::error_code ignored;
      acceptor.close(ignored);
    });
    for (const auto& s : open) s->conn->close();
    {
      std::unique_lock lock(mu);
      cv.wait_for(lock, std::chrono::seconds(2), [&] { return sessions.empty(); });
      open.assign(sessions.begin(), sessions.end());
    }
    for (const auto& s : open) s->conn->abort();
    {
      std::unique_lock lock(mu);
      cv.wait_for(lock, std::chrono::seconds(1), [&] { return sessions.empty(); });
    }
    ioc.stop();
    if (thread.joinable()) thread.join();
  }
};

HubServer::HubServer(hub::Hub& hub, const HubServerOptions& opts) : impl_(std::make_unique<Impl>(hub, opts)) {}
HubServer::~HubServer() { stop(); }
std::uint16_t HubServer::port() const noexcept { return impl_->acceptor.local_endpoint().port(); }
void HubServer::stop() { impl_->stop(); }

// ---------------------------------------------------------------------------------------------

struct PeerLink::Impl {
  hub::Hub& hub;
  PeerLinkOptions opts;
  asio::io_context ioc{1};
  asio::executor_work_guard<asio::io_context::executor_type> work{ioc.get_executor()};
  std::thread io_thread;
  std::thread dialer;
  mutable std::mutex mu;
  mutable std::condition_variable cv;
  bool stopping = false;
  bool linked = false;
  std::uint64_t connect_count = 0;
  std::shared_ptr<WsConnection> current;

  Impl(hub::Hub& h, const PeerLinkOptions& o) : hub(h), opts(o) {
    io_thread = std::thread([this] { ioc.run(); });
    dialer = std::thread([this] { loop(); });
  }

  void loop() {
    while (true) {
      {
        std::lock_guard lock(mu);
        if (stopping) return;
      }
      try {
        run_once();
      } catch (const std::exception&) {
        // unreachable or rejected; retry below
      }
      std::unique_lock lock(mu);
      if (cv.wait_for(lock, opts.retry, [&] { return stopping; })) return;
    }
  }

  void run_once() {
    auto ws = dial(ioc, opts.host, opts.port);
    hub::RegisterRequest req;
    req.role = hub::ClientRole::peer;
    req.hub_id = hub.id();
    ws.text(true);
    ws.write(asio::buffer(hub::encode_register(req)));

    auto conn = std::make_shared<WsConnection>(std::move(ws), opts.send_queue);
    const auto sid = hub.link_peer(opts.peer_id, std::make_shared<ConnSink>(conn));
    bool closed = false;
    {
      std::lock_guard lock(mu);
      linked = true;
      ++connect_count;
      current = conn;
    }
    cv.notify_all();
    conn->start(
        [this, sid](std::string&& data, bool binary) {
          try {
            if (binary) {
              hub.handle_binary(sid, std::make_shared<const std::string>(std::move(data)));
            } else {
              hub.handle(sid, hub::parse_message(data));
            }
          } catch (const std::exception&) {
            // a malformed message from the peer is dropped
          }
        },
        [this, &closed] {
          std::lock_guard lock(mu);
          closed = true;
          cv.notify_all();
        });
    {
      std::unique_lock lock(mu);
      cv.wait(lock, [&] { return closed || stopping; });
      linked = false;
      current.reset();
    }
    hub.unregister(sid);
    if (!closed) {
      conn->close();
      std::unique_lock lock(mu);
      if (!cv.wait_for(lock, std::chrono::seconds(2), [&] { return closed; })) {
        lock.unlock();
        conn->abort();
        lock.lock();
        cv.wait(lock, [&] { return closed; });
      }
    }
  }

  void stop() {
    {
      std::lock_guard lock(mu);
      if (stopping) return;
      stopping = true;
    }
    cv.notify_all();
    if (dialer.joinable()) dialer.join();
    work.reset();
    ioc.stop();
    if (io_thread.joinable()) io_thread.join();
  }
};

PeerLink::PeerLink(hub::Hub& hub, const PeerLinkOptions& opts) : impl_(std::make_unique<Impl>(hub, opts)) {}
PeerLink::~PeerLink() { stop(); }

bool PeerLink::connected() const {
  std::lock_guard lock(impl_->mu);
  return impl_->linked;
}

std::uint64_t PeerLink::connects() const {
  std::lock_guard lock(impl_->mu);
  return impl_->connect_count;
}

bool PeerLink::wait_connected(std::chrono::milliseconds timeout) const {
  std::unique_lock lock(impl_->mu);
  return impl_->cv.wait_for(lock, timeout, [&] { return impl_->linked; });
}

void PeerLink::stop() { impl_->stop(); }

// ---------------------------------------------------------------------------------------------

struct HubClient::Impl {
  asio::io_context ioc{1};
  asio::executor_work_guard<asio::io_context::executor_type> work{ioc.get_executor()};
  std::thread thread;
  std::shared_ptr<WsConnection> conn;
  Handler handler;
  hub::SnapshotMessage snapshot;

  mutable std::mutex mu;
  std::condition_variable cv;
  std::deque<hub::Message> inbox;
  std::optional<hub::Message> first;
  bool closed = false;

  void on_message(std::string&& data, bool binary) {
    std::optional<hub::Message> m;
    try {
      m = decode(data, binary);
    } catch (const std::exception&) {
      return;
    }
    std::unique_lock lock(mu);
    if (!first) {
      first = std::move(m);
      cv.notify_all();
      return;
    }
    if (handler) {
      lock.unlock();
      handler(*m, data.size());
      return;
    }
    inbox.push_back(std::move(*m));
    cv.notify_all();
  }

  void shutdown() {
    if (conn) {
      conn->close();
      std::unique_lock lock(mu);
      if (!cv.wait_for(lock, std::chrono::seconds(2), [&] { return closed; })) {
        lock.unlock();
        conn->abort();
        lock.lock();
        cv.wait_for(lock, std::chrono::seconds(1), [&] { return closed; });
      }
    }
    work.reset();
    ioc.stop();
    if (thread.joinable()) thread.join();
  }
};

HubClient::HubClient(const std::string& host, std::uint16_t port, const hub::RegisterRequest& req, Handler handler,
                     std::chrono::milliseconds timeout)
    : impl_(std::make_unique<Impl>()) {
  auto& im = *impl_;
  im.handler = std::move(handler);
  im.thread = std::thread([&im] { im.ioc.run(); });
  try {
    im.conn = std::make_shared<WsConnection>(dial(im.ioc, host, port), 1u << 16);
    im.conn->start([&im](std::string&& data, bool binary) { im.on_message(std::move(data), binary); },
                   [&im] {
                     std::lock_guard lock(im.mu);
                     im.closed = true;
                     im.cv.notify_all();
                   });
    im.conn->send(shared_text(hub::encode_register(req)), false);

    std::unique_lock lock(im.mu);
    if (!im.cv.wait_for(lock, timeout, [&] { return im.first.has_value() || im.closed; })) {
      throw NetError(NetErrorCode::timeout, "no snapshot from hub");
    }
    if (!im.first) throw NetError(NetErrorCode::closed, "hub closed the connection during registration");
    if (const auto* err = std::get_if<hub::ErrorMessage>(&im.first->body)) {
      throw NetError(NetErrorCode::rejected, fmt::format("{}: {}", err->code, err->message));
    }
    const auto* snap = std::get_if<hub::SnapshotMessage>(&im.first->body);
    if (!snap) throw NetError(NetErrorCode::rejected, "first message was not a snapshot");
    im.snapshot = *snap;
  } catch (...) {
    im.shutdown();
    throw;
  }
}

HubClient::~HubClient() { close(); }

const hub::SnapshotMessage& HubClient::snapshot() const { return impl_->snapshot; }

void HubClient::send_text(std::string text) {
  if (!impl_->conn->send(shared_text(std::move(text)), false)) throw NetError(NetErrorCode::closed, "connection closed");
}

void HubClient::send_binary(std::string bytes) {
  if (!impl_->conn->send(shared_text(std::move(bytes)), true)) throw NetError(NetErrorCode::closed, "connection closed");
}

void HubClient::send_frame(const pointcloud::PointCloudFrame& f) {
  const auto bytes = pointcloud::encode_binary(f);
  send_binary(std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

void HubClient::send_status(const analysis::StatusEvent& e) { send_text(hub::encode_status(0, e)); }

void HubClient::send_interaction(const hub::Payload& p) {
  send_text(hub::encode_interaction(hub::InteractionMessage{std::nullopt, std::nullopt, p}));
}

std::optional<hub::Message> HubClient::next(std::chrono::milliseconds timeout) {
  std::unique_lock lock(impl_->mu);
  if (!impl_->cv.wait_for(lock, timeout, [&] { return !impl_->inbox.empty() || impl_->closed; })) return std::nullopt;
  if (impl_->inbox.empty()) return std::nullopt;
  auto m = std::move(impl_->inbox.front());
  impl_->inbox.pop_front();
  return m;
}

bool HubClient::closed() const {
  std::lock_guard lock(impl_->mu);
  return impl_->closed;
}

bool HubClient::flush(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (!impl_->conn->idle()) {
    if (std::chrono::steady_clock::now() >= deadline) return false;
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  return !impl_->conn->failed();
}

void HubClient::close() {
  if (impl_ && impl_->thread.joinable()) impl_->shutdown();
}

}  // namespace fabwatch::net
