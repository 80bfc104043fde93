#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>

#include "fabwatch/ingestion/broker.hpp"
#include "fabwatch/net/errors.hpp"

namespace fabwatch::net {

struct BrokerServerOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

/// Exposes a Broker over TCP with the length-prefixed envelope protocol. One connection may
/// publish any number of readings and subscribe at most once; unacked deliveries of a dropped
/// connection come back after their ack deadline.
class BrokerServer {
 public:
  // Binds immediately; throws NetError{port_in_use}.
  BrokerServer(ingestion::Broker& broker, const BrokerServerOptions& opts);
  ~BrokerServer();
  BrokerServer(const BrokerServer&) = delete;
  BrokerServer& operator=(const BrokerServer&) = delete;

  [[nodiscard]] std::uint16_t port() const noexcept;
  [[nodiscard]] std::size_t connections() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Publishes over one connection and waits for each receipt. Throws IngestionError; a lost
// connection surfaces as broker_unavailable.
class RemotePublisher : public ingestion::ReadingPublisher {
 public:
  RemotePublisher(const std::string& host, std::uint16_t port);
  ~RemotePublisher() override;

  ingestion::Offset publish(const ingestion::Topic& topic, const ingestion::SensorReading& reading) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class RemoteConsumer : public ingestion::DeliverySource {
 public:
  RemoteConsumer(const std::string& host, std::uint16_t port, const ingestion::Subscription& sub);
  ~RemoteConsumer() override;

  // Throws IngestionError{broker_unavailable} once the connection is gone and nothing is buffered.
  std::vector<ingestion::Delivery> next(std::chrono::milliseconds timeout) override;
  void ack(const ingestion::Topic& topic, ingestion::Offset offset) override;
  void close();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace fabwatch::net
