#include "fabwatch/ingestion/broker.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace fabwatch::ingestion {

std::uint64_t steady_now_ms() {
  using namespace std::chrono;
  return static_cast<std::uint64_t>(duration_cast<milliseconds>(steady_clock::now().time_since_epoch()).count());
}

Broker::Broker(Clock clock) : clock_(std::move(clock)) {}

void Broker::require_running() const {
  if (!running_) throw IngestionError(ErrorCode::broker_unavailable, "broker is shut down");
}

Broker::ConsumerState& Broker::consumer_locked(const std::string& consumer) {
  auto it = consumers_.find(consumer);
  if (it == consumers_.end()) {
    throw IngestionError(ErrorCode::unknown_consumer, fmt::format("consumer '{}' is not subscribed", consumer));
  }
  return it->second;
}

Offset Broker::publish(const Topic& topic, const SensorReading& reading) {
  if (topic.str().empty()) throw IngestionError(ErrorCode::invalid_topic, "empty topic");
  Offset offset;
  {
    std::lock_guard lock(mu_);
    require_running();
    auto& log = topics_[topic];
    offset = log.size();
    log.push_back(reading);
    ++stats_.published;
  }
  cv_.notify_all();
  return offset;
}

void Broker::subscribe(const Subscription& sub) {
  if (sub.consumer.empty()) throw IngestionError(ErrorCode::unknown_consumer, "empty consumer id");
  if (sub.pattern.str().empty()) throw IngestionError(ErrorCode::invalid_pattern, "empty topic pattern");
  std::lock_guard lock(mu_);
  require_running();
  consumers_[sub.consumer].sub = sub;
}

void Broker::unsubscribe(const std::string& consumer) {
  std::lock_guard lock(mu_);
  consumers_.erase(consumer);
}

std::vector<Delivery> Broker::poll_locked(ConsumerState& c, std::size_t max) {
  std::vector<Delivery> out;
  const std::uint64_t now = clock_();

  // Redeliveries whose deadline passed.
  while (out.size() < max && !c.by_deadline.empty()) {
    auto it = c.by_deadline.begin();
    const auto& [deadline, topic, offset] = *it;
    if (deadline > now) break;
    auto& entry = c.in_flight.at({topic, offset});
    ++entry.attempt;
    entry.deadline_ms = now + c.sub.ack_deadline_ms;
    out.push_back({topic, offset, topics_.at(topic)[offset], entry.attempt});
    c.by_deadline.insert({entry.deadline_ms, topic, offset});
    c.by_deadline.erase(it);
    ++stats_.redelivered;
  }

  // New messages, one per matching topic per pass so no topic starves the others.
  bool progressed = true;
  while (out.size() < max && progressed) {
    progressed = false;
    for (const auto& [topic, log] : topics_) {
      if (out.size() >= max) break;
      if (!c.sub.pattern.matches(topic)) continue;
      Offset& next = c.cursor[topic];
      if (next >= log.size()) continue;
      const std::uint64_t deadline = now + c.sub.ack_deadline_ms;
      c.in_flight[{topic, next}] = {deadline, 1};
      c.by_deadline.insert({deadline, topic, next});
      out.push_back({topic, next, log[next], 1});
      ++next;
      progressed = true;
    }
  }
  stats_.delivered += out.size();
  return out;
}

bool Broker::has_new_locked(const ConsumerState& c) const {
  for (const auto& [topic, log] : topics_) {
    if (!c.sub.pattern.matches(topic)) continue;
    auto it = c.cursor.find(topic);
    const Offset next = it == c.cursor.end() ? 0 : it->second;
    if (next < log.size()) return true;
  }
  return false;
}

std::optional<std::uint64_t> Broker::next_deadline_locked(const ConsumerState& c) const {
  if (c.by_deadline.empty()) return std::nullopt;
  return std::get<0>(*c.by_deadline.begin());
}

std::vector<Delivery> Broker::poll(const std::string& consumer, std::size_t max) {
  std::lock_guard lock(mu_);
  require_running();
  return poll_locked(consumer_locked(consumer), max);
}

std::vector<Delivery> Broker::wait(const std::string& consumer, std::chrono::milliseconds timeout,
                                   std::size_t max) {
  const auto until = std::chrono::steady_clock::now() + timeout;
  std::unique_lock lock(mu_);
  while (true) {
    require_running();
    auto& c = consumer_locked(consumer);
    if (has_new_locked(c)) return poll_locked(c, max);
    const auto deadline = next_deadline_locked(c);
    const std::uint64_t now = clock_();
    if (deadline && *deadline <= now) return poll_locked(c, max);

    auto wake = until;
    if (deadline) {
      wake = std::min(wake, std::chrono::steady_clock::now() + std::chrono::milliseconds(*deadline - now));
    }
    if (std::chrono::steady_clock::now() >= until) return {};
    cv_.wait_until(lock, wake);
  }
}

void Broker::ack(const std::string& consumer, const Topic& topic, Offset offset) {
  std::lock_guard lock(mu_);
  require_running();
  auto& c = consumer_locked(consumer);
  auto it = c.in_flight.find({topic, offset});
  if (it != c.in_flight.end()) {
    c.by_deadline.erase({it->second.deadline_ms, topic, offset});
    c.in_flight.erase(it);
    ++stats_.acked;
    return;
  }
  auto cur = c.cursor.find(topic);
  if (cur == c.cursor.end() || offset >= cur->second) {
    throw IngestionError(ErrorCode::unknown_offset,
                         fmt::format("offset {} on '{}' was never delivered to '{}'", offset, topic.str(), consumer));
  }
  // Delivered earlier and already acked: idempotent.
}

void Broker::shutdown() {
  {
    std::lock_guard lock(mu_);
    running_ = false;
  }
  cv_.notify_all();
}

bool Broker::running() const {
  std::lock_guard lock(mu_);
  return running_;
}

BrokerStats Broker::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

std::size_t Broker::in_flight(const std::string& consumer) const {
  std::lock_guard lock(mu_);
  auto it = consumers_.find(consumer);
  return it == consumers_.end() ? 0 : it->second.in_flight.size();
}

std::size_t Broker::topic_size(const Topic& topic) const {
  std::lock_guard lock(mu_);
  auto it = topics_.find(topic);
  return it == topics_.end() ? 0 : it->second.size();
}

BrokerConsumer::BrokerConsumer(Broker& broker, Subscription sub) : broker_(broker), consumer_(sub.consumer) {
  broker_.subscribe(sub);
}

std::vector<Delivery> BrokerConsumer::next(std::chrono::milliseconds timeout) {
  return broker_.wait(consumer_, timeout);
}

void BrokerConsumer::ack(const Topic& topic, Offset offset) { broker_.ack(consumer_, topic, offset); }

}  // namespace fabwatch::ingestion
