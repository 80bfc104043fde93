#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fabwatch/ingestion/errors.hpp"
#include "fabwatch/ingestion/reading.hpp"
#include "fabwatch/ingestion/topic.hpp"

namespace fabwatch::ingestion {

using Offset = std::uint64_t;

inline constexpr std::uint64_t kDefaultAckDeadlineMs = 5000;

struct Subscription {
  TopicPattern pattern;
  std::string consumer;
  std::uint64_t ack_deadline_ms = kDefaultAckDeadlineMs;
};

struct Delivery {
  Topic topic;
  Offset offset = 0;
  SensorReading reading;
  std::uint32_t attempt = 1;  // 1 on first delivery, incremented per redelivery

  friend bool operator==(const Delivery&, const Delivery&) = default;
};

// Monotonic milliseconds. Injected so tests can drive ack deadlines by hand.
using Clock = std::function<std::uint64_t()>;
std::uint64_t steady_now_ms();

class ReadingPublisher {
 public:
  virtual ~ReadingPublisher() = default;
  virtual Offset publish(const Topic& topic, const SensorReading& reading) = 0;
};

// Consumer side of the at-least-once contract, independent of transport.
class DeliverySource {
 public:
  virtual ~DeliverySource() = default;
  // Blocks up to `timeout` for at least one delivery; returns empty on timeout.
  virtual std::vector<Delivery> next(std::chrono::milliseconds timeout) = 0;
  virtual void ack(const Topic& topic, Offset offset) = 0;
};

struct BrokerStats {
  std::uint64_t published = 0;
  std::uint64_t delivered = 0;
  std::uint64_t redelivered = 0;
  std::uint64_t acked = 0;
};

/// In-process topic broker with at-least-once delivery.
///
/// Every topic is an append-only log with dense offsets starting at 0. A subscriber sees every
/// message of every matching topic from offset 0, in per-topic offset order. A delivered message
/// stays in flight until acked; once its ack deadline passes it is handed out again. Acking is
/// idempotent. All members are safe to call concurrently.
class Broker : public ReadingPublisher {
 public:
  explicit Broker(Clock clock = steady_now_ms);

  Offset publish(const Topic& topic, const SensorReading& reading) override;

  // Re-subscribing an existing consumer replaces its pattern and deadline but keeps progress.
  void subscribe(const Subscription& sub);
  void unsubscribe(const std::string& consumer);

  // Due redeliveries first (oldest deadline first), then new messages round-robin across topics.
  std::vector<Delivery> poll(const std::string& consumer, std::size_t max = SIZE_MAX);

  // poll() that blocks until something is available, the timeout expires or the broker stops.
  std::vector<Delivery> wait(const std::string& consumer, std::chrono::milliseconds timeout,
                             std::size_t max = SIZE_MAX);

  void ack(const std::string& consumer, const Topic& topic, Offset offset);

  // Makes every later call fail with broker_unavailable and wakes blocked waiters.
  void shutdown();
  [[nodiscard]] bool running() const;

  [[nodiscard]] BrokerStats stats() const;
  [[nodiscard]] std::size_t in_flight(const std::string& consumer) const;
  [[nodiscard]] std::size_t topic_size(const Topic& topic) const;

 private:
  struct InFlight {
    std::uint64_t deadline_ms;
    std::uint32_t attempt;
  };
  struct ConsumerState {
    Subscription sub;
    std::map<Topic, Offset> cursor;                            // next never-delivered offset
    std::map<std::pair<Topic, Offset>, InFlight> in_flight;
    std::set<std::tuple<std::uint64_t, Topic, Offset>> by_deadline;
  };

  void require_running() const;
  ConsumerState& consumer_locked(const std::string& consumer);
  std::vector<Delivery> poll_locked(ConsumerState& c, std::size_t max);
  std::optional<std::uint64_t> next_deadline_locked(const ConsumerState& c) const;
  bool has_new_locked(const ConsumerState& c) const;

  Clock clock_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  bool running_ = true;
  std::map<Topic, std::vector<SensorReading>> topics_;
  std::map<std::string, ConsumerState> consumers_;
  BrokerStats stats_;
};

// DeliverySource bound to one consumer of an in-process broker.
class BrokerConsumer : public DeliverySource {
 public:
  BrokerConsumer(Broker& broker, Subscription sub);
  std::vector<Delivery> next(std::chrono::milliseconds timeout) override;
  void ack(const Topic& topic, Offset offset) override;

 private:
  Broker& broker_;
  std::string consumer_;
};

}  // namespace fabwatch::ingestion
