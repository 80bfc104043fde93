#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

namespace fabwatch::net::detail {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

inline constexpr std::size_t kMaxMessageBytes = 256u << 20;

// Websocket with an outbound queue. send() and close() may be called from any thread; all
// stream operations run on the stream's executor.
class WsConnection : public std::enable_shared_from_this<WsConnection> {
 public:
  using Stream = websocket::stream<beast::tcp_stream>;
  using OnMessage = std::function<void(std::string&& data, bool binary)>;
  using OnClose = std::function<void()>;

  WsConnection(Stream&& ws, std::size_t queue_limit) : ws_(std::move(ws)), limit_(queue_limit) {
    ws_.read_message_max(kMaxMessageBytes);
  }

  // Server side: completes the websocket handshake, then calls `done`.
  void accept(std::function<void(beast::error_code)> done) {
    ws_.async_accept([self = shared_from_this(), done = std::move(done)](beast::error_code ec) { done(ec); });
  }

  void start(OnMessage on_message, OnClose on_close) {
    on_message_ = std::move(on_message);
    on_close_ = std::move(on_close);
    asio::post(ws_.get_executor(), [self = shared_from_this()] { self->read(); });
  }

  // False when the connection is closing or the queue is full.
  bool send(std::shared_ptr<const std::string> data, bool binary) {
    std::lock_guard lock(mu_);
    if (closing_ || queue_.size() >= limit_) return false;
    queue_.push_back({std::move(data), binary});
    if (!writing_) {
      writing_ = true;
      asio::post(ws_.get_executor(), [self = shared_from_this()] { self->write_next(); });
    }
    return true;
  }

  // Flushes queued messages, then closes.
  void close() {
    std::lock_guard lock(mu_);
    if (closing_) return;
    closing_ = true;
    if (!writing_) {
      writing_ = true;
      asio::post(ws_.get_executor(), [self = shared_from_this()] { self->write_next(); });
    }
  }

  // Immediate teardown without flushing.
  void abort() {
    asio::post(ws_.get_executor(), [self = shared_from_this()] { self->fail(); });
  }

  [[nodiscard]] std::size_t queued() const {
    std::lock_guard lock(mu_);
    return queue_.size();
  }

  // Nothing queued or being written.
  [[nodiscard]] bool idle() const {
    std::lock_guard lock(mu_);
    return !writing_ || failed_;
  }

  [[nodiscard]] bool failed() const {
    std::lock_guard lock(mu_);
    return failed_;
  }

 private:
  struct Pending {
    std::shared_ptr<const std::string> data;
    bool binary;
  };

  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->fail();
      auto data = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      if (self->on_message_) self->on_message_(std::move(data), self->ws_.got_binary());
      self->read();
    });
  }

  void write_next() {
    Pending next;
    {
      std::lock_guard lock(mu_);
      if (queue_.empty()) {
        if (closing_ && !close_sent_ && !failed_) {
          close_sent_ = true;
          ws_.async_close(websocket::close_code::normal,
                          [self = shared_from_this()](beast::error_code) { self->fail(); });
          return;
        }
        writing_ = false;
        return;
      }
      next = std::move(queue_.front());
      queue_.pop_front();
    }
    ws_.binary(next.binary);
    ws_.async_write(asio::buffer(*next.data),
                    [self = shared_from_this(), keep = next.data](beast::error_code ec, std::size_t) {
                      if (ec) return self->fail();
                      self->write_next();
                    });
  }

  void fail() {
    OnClose cb;
    {
      std::lock_guard lock(mu_);
      if (failed_) return;
      failed_ = true;
      closing_ = true;
      queue_.clear();
      cb = std::move(on_close_);
    }
    beast::error_code ignored;
    beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ignored);
    beast::get_lowest_layer(ws_).socket().close(ignored);
    if (cb) cb();
    on_message_ = nullptr;
  }

  Stream ws_;
  beast::flat_buffer buffer_;
  std::size_t limit_;
  mutable std::mutex mu_;
  std::deque<Pending> queue_;
  bool writing_ = false;
  bool closing_ = false;
  bool close_sent_ = false;
  bool failed_ = false;
  OnMessage on_message_;
  OnClose on_close_;
};

}  // namespace fabwatch::net::detail
