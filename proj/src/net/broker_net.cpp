#include "fabwatch/net/broker_net.hpp"

#include <condition_variable>
#include <deque>
#include <list>
#include <mutex>
#include <thread>

#include <boost/asio.hpp>
#include <fmt/format.h>

#include "fabwatch/ingestion/errors.hpp"
#include "fabwatch/ingestion/wire.hpp"

namespace fabwatch::net {

namespace asio = boost::asio;
using tcp = asio::ip::tcp;
using ingestion::ErrorCode;
using ingestion::IngestionError;
namespace wire = ingestion::wire;

namespace {

tcp::endpoint resolve(asio::io_context& ioc, const std::string& host, std::uint16_t port) {
  tcp::resolver resolver(ioc);
  boost::system::error_code ec;
  auto results = resolver.resolve(host, std::to_string(port), ec);
  if (ec || results.empty()) {
    throw NetError(NetErrorCode::unreachable, fmt::format("cannot resolve {}: {}", host, ec.message()));
  }
  return *results.begin();
}

// Blocking envelope stream over a socket. Reads and writes may run on different threads.
class EnvelopeSocket {
 public:
  explicit EnvelopeSocket(tcp::socket s) : sock_(std::move(s)) {
    boost::system::error_code ec;
    sock_.set_option(tcp::no_delay(true), ec);
  }

  // False when the connection is gone.
  bool write(const wire::Envelope& e) {
    const auto bytes = wire::encode(e);
    std::lock_guard lock(write_mu_);
    boost::system::error_code ec;
    asio::write(sock_, asio::buffer(bytes.data(), bytes.size()), ec);
    return !ec;
  }

  // nullopt on EOF or error. Throws IngestionError{protocol} on a malformed stream.
  std::optional<wire::Envelope> read() {
    while (true) {
      if (auto e = reader_.next()) return e;
      boost::system::error_code ec;
      const auto n = sock_.read_some(asio::buffer(buf_), ec);
      if (ec) return std::nullopt;
      reader_.feed(std::span(buf_.data(), n));
    }
  }

  void shutdown() {
    boost::system::error_code ec;
    sock_.shutdown(tcp::socket::shutdown_both, ec);
  }

 private:
  tcp::socket sock_;
  std::mutex write_mu_;
  wire::EnvelopeReader reader_;
  std::array<std::byte, 64 * 1024> buf_{};
};

tcp::socket connect(asio::io_context& ioc, const std::string& host, std::uint16_t port) {
  tcp::socket s(ioc);
  boost::system::error_code ec;
  s.connect(resolve(ioc, host, port), ec);
  if (ec) {
    throw IngestionError(ErrorCode::broker_unavailable,
                         fmt::format("cannot connect to broker {}:{}: {}", host, port, ec.message()));
  }
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------------------------

struct BrokerServer::Impl {
  struct Connection {
    std::unique_ptr<EnvelopeSocket> sock;
    std::thread reader;
    std::thread pump;
    std::atomic<bool> done{false};
  };

  ingestion::Broker& broker;
  asio::io_context ioc{1};
  tcp::acceptor acceptor{ioc};
  std::thread accept_thread;
  mutable std::mutex mu;
  std::list<std::unique_ptr<Connection>> conns;
  std::atomic<bool> stopping{false};

  Impl(ingestion::Broker& b, const BrokerServerOptions& opts) : broker(b) {
    const auto ep = resolve(ioc, opts.host, opts.port);
    boost::system::error_code ec;
    acceptor.open(ep.protocol(), ec);
    if (!ec) acceptor.set_option(asio::socket_base::reuse_address(true), ec);
    if (!ec) acceptor.bind(ep, ec);
    if (!ec) acceptor.listen(asio::socket_base::max_listen_connections, ec);
    if (ec) {
      const auto code = ec == asio::error::address_in_use ? NetErrorCode::port_in_use : NetErrorCode::unreachable;
      throw NetError(code, fmt::format("cannot listen on {}:{}: {}", opts.host, opts.port, ec.message()));
    }
    accept();
    accept_thread = std::thread([this] { ioc.run(); });
  }

  void accept() {
    acceptor.async_accept([this](boost::system::error_code ec, tcp::socket socket) {
      if (ec || stopping) return;
      reap();
      auto c = std::make_unique<Connection>();
      c->sock = std::make_unique<EnvelopeSocket>(std::move(socket));
      auto* raw = c.get();
      {
        std::lock_guard lock(mu);
        conns.push_back(std::move(c));
      }
      raw->reader = std::thread([this, raw] { serve(*raw); });
      accept();
    });
  }

  void reap() {
    std::list<std::unique_ptr<Connection>> finished;
    {
      std::lock_guard lock(mu);
      for (auto it = conns.begin(); it != conns.end();) {
        if ((*it)->done) {
          finished.push_back(std::move(*it));
          it = conns.erase(it);
        } else {
          ++it;
        }
      }
    }
    for (auto& c : finished) join(*c);
  }

  static void join(Connection& c) {
    if (c.reader.joinable()) c.reader.join();
    if (c.pump.joinable()) c.pump.join();
  }

  void serve(Connection& c) {
    std::string consumer;
    try {
      while (auto e = c.sock->read()) {
        try {
          switch (e->kind) {
            case wire::Kind::publish: {
              const auto req = wire::parse_publish(*e);
              const auto offset = broker.publish(req.topic, req.reading);
              c.sock->write(wire::receipt_envelope(req.topic, offset));
              break;
            }
            case wire::Kind::subscribe: {
              if (!consumer.empty()) throw IngestionError(ErrorCode::protocol, "connection is already subscribed");
              const auto sub = wire::parse_subscribe(*e);
              broker.subscribe(sub);
              consumer = sub.consumer;
              c.pump = std::thread([this, &c, consumer] { pump(c, consumer); });
              break;
            }
            case wire::Kind::ack: {
              if (consumer.empty()) throw IngestionError(ErrorCode::unknown_consumer, "ack before subscribe");
              const auto [topic, offset] = wire::parse_ack(*e);
              broker.ack(consumer, topic, offset);
              break;
            }
            default:
              throw IngestionError(ErrorCode::protocol, "unexpected envelope kind from client");
          }
        } catch (const IngestionError& err) {
          c.sock->write(wire::error_envelope(err.code(), err.what()));
          if (err.code() == ErrorCode::broker_unavailable) break;
        }
      }
    } catch (const IngestionError& err) {
      c.sock->write(wire::error_envelope(err.code(), err.what()));
    }
    c.done = true;
    c.sock->shutdown();
  }

  void pump(Connection& c, const std::string& consumer) {
    while (!c.done && !stopping) {
      std::vector<ingestion::Delivery> batch;
      try {
        batch = broker.wait(consumer, std::chrono::milliseconds(100), 256);
      } catch (const IngestionError&) {
        break;
      }
      for (const auto& d : batch) {
        if (!c.sock->write(wire::deliver_envelope(d))) return;
      }
    }
  }

  void stop() {
    if (stopping.exchange(true)) return;
    asio::post(ioc, [this] {
      boost::system::error_code ignored;
      acceptor.close(ignored);
    });
    if (accept_thread.joinable()) accept_thread.join();
    std::list<std::unique_ptr<Connection>> all;
    {
      std::lock_guard lock(mu);
      all.swap(conns);
    }
    for (auto& c : all) {
      c->done = true;
      c->sock->shutdown();
    }
    for (auto& c : all) join(*c);
  }
};

BrokerServer::BrokerServer(ingestion::Broker& broker, const BrokerServerOptions& opts)
    : impl_(std::make_unique<Impl>(broker, opts)) {}
BrokerServer::~BrokerServer() { stop(); }
std::uint16_t BrokerServer::port() const noexcept { return impl_->acceptor.local_endpoint().port(); }

std::size_t BrokerServer::connections() const {
  std::lock_guard lock(impl_->mu);
  std::size_t n = 0;
  for (const auto& c : impl_->conns) n += !c->done;
  return n;
}

void BrokerServer::stop() { impl_->stop(); }

// ---------------------------------------------------------------------------------------------

struct RemotePublisher::Impl {
  asio::io_context ioc;
  std::mutex mu;
  std::unique_ptr<EnvelopeSocket> sock;
};

RemotePublisher::RemotePublisher(const std::string& host, std::uint16_t port) : impl_(std::make_unique<Impl>()) {
  impl_->sock = std::make_unique<EnvelopeSocket>(connect(impl_->ioc, host, port));
}

RemotePublisher::~RemotePublisher() { impl_->sock->shutdown(); }

ingestion::Offset RemotePublisher::publish(const ingestion::Topic& topic, const ingestion::SensorReading& reading) {
  std::lock_guard lock(impl_->mu);
  if (!impl_->sock->write(wire::publish_envelope(topic, reading))) {
    throw IngestionError(ErrorCode::broker_unavailable, "broker connection lost");
  }
  const auto reply = impl_->sock->read();
  if (!reply) throw IngestionError(ErrorCode::broker_unavailable, "broker connection lost");
  if (reply->kind == wire::Kind::error) throw wire::parse_error(*reply);
  if (reply->kind != wire::Kind::receipt) throw IngestionError(ErrorCode::protocol, "expected a receipt");
  return wire::parse_receipt(*reply);
}

// ---------------------------------------------------------------------------------------------

struct RemoteConsumer::Impl {
  asio::io_context ioc;
  std::unique_ptr<EnvelopeSocket> sock;
  std::thread reader;
  std::mutex mu;
  std::condition_variable cv;
  std::deque<ingestion::Delivery> inbox;
  std::optional<IngestionError> error;
  bool gone = false;

  void read_loop() {
    try {
      while (auto e = sock->read()) {
        std::lock_guard lock(mu);
        if (e->kind == wire::Kind::deliver) {
          inbox.push_back(wire::parse_deliver(*e));
        } else if (e->kind == wire::Kind::error) {
          error = wire::parse_error(*e);
        }
        cv.notify_all();
      }
    } catch (const IngestionError& e) {
      std::lock_guard lock(mu);
      error = e;
    }
    std::lock_guard lock(mu);
    gone = true;
    cv.notify_all();
  }
};

RemoteConsumer::RemoteConsumer(const std::string& host, std::uint16_t port, const ingestion::Subscription& sub)
    : impl_(std::make_unique<Impl>()) {
  impl_->sock = std::make_unique<EnvelopeSocket>(connect(impl_->ioc, host, port));
  if (!impl_->sock->write(wire::subscribe_envelope(sub))) {
    throw IngestionError(ErrorCode::broker_unavailable, "broker connection lost");
  }
  impl_->reader = std::thread([im = impl_.get()] { im->read_loop(); });
}

RemoteConsumer::~RemoteConsumer() { close(); }

std::vector<ingestion::Delivery> RemoteConsumer::next(std::chrono::milliseconds timeout) {
  std::unique_lock lock(impl_->mu);
  impl_->cv.wait_for(lock, timeout, [&] { return !impl_->inbox.empty() || impl_->gone || impl_->error; });
  if (impl_->error) {
    auto e = *impl_->error;
    impl_->error.reset();
    throw e;
  }
  if (impl_->inbox.empty() && impl_->gone) {
    throw IngestionError(ErrorCode::broker_unavailable, "broker connection lost");
  }
  std::vector<ingestion::Delivery> out(std::make_move_iterator(impl_->inbox.begin()),
                                       std::make_move_iterator(impl_->inbox.end()));
  impl_->inbox.clear();
  return out;
}

void RemoteConsumer::ack(const ingestion::Topic& topic, ingestion::Offset offset) {
  if (!impl_->sock->write(wire::ack_envelope(topic, offset))) {
    throw IngestionError(ErrorCode::broker_unavailable, "broker connection lost");
  }
}

void RemoteConsumer::close() {
  if (!impl_ || !impl_->reader.joinable()) return;
  impl_->sock->shutdown();
  impl_->reader.join();
}

}  // namespace fabwatch::net
