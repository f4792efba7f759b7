#pragma once

#include <atomic>
#include <chrono>
#include <string>
#include <utility>
#include <vector>

#include "bls/manikin.hpp"
#include "bls/session.hpp"

namespace bls {

// Line-oriented device connection. exchange() sends one line and returns every line the
// device produced up to and including its ACK or ERR reply.
class DeviceChannel : public DeviceLink {
 public:
  virtual std::vector<std::string> exchange(const std::string& line) = 0;
  std::string command(const std::string& line) override;
};

class LocalDeviceChannel : public DeviceChannel {
 public:
  explicit LocalDeviceChannel(DeviceConfig config) : device_(std::move(config)) {}
  std::vector<std::string> exchange(const std::string& line) override { return device_.handleLine(line); }
  ManikinDevice& device() { return device_; }

 private:
  ManikinDevice device_;
};

class TcpDeviceChannel : public DeviceChannel {
 public:
  // Throws Error(DeviceUnreachable) when the connection cannot be opened.
  TcpDeviceChannel(const std::string& host, int port, std::chrono::milliseconds timeout = std::chrono::seconds(5));
  ~TcpDeviceChannel() override;
  TcpDeviceChannel(const TcpDeviceChannel&) = delete;
  TcpDeviceChannel& operator=(const TcpDeviceChannel&) = delete;

  std::vector<std::string> exchange(const std::string& line) override;

 private:
  std::string read_line();

  int fd_ = -1;
  std::chrono::milliseconds timeout_;
  std::string buffer_;
};

// "host:port" or ":port"/"port" (host defaults to 127.0.0.1). Throws InvalidArgument.
std::pair<std::string, int> parse_address(const std::string& addr);

// Serves one ManikinDevice over TCP, one client at a time. A realtime device advances
// with the wall clock from the moment a client connects (or resets it) and pushes its
// samples unprompted; a stepped device only moves on SIM TICK.
class DeviceServer {
 public:
  // Binds immediately; port 0 picks a free port. Throws Error(Io) when the port is busy.
  DeviceServer(DeviceConfig config, int port);
  ~DeviceServer();
  DeviceServer(const DeviceServer&) = delete;
  DeviceServer& operator=(const DeviceServer&) = delete;

  int port() const { return port_; }
  const DeviceConfig& config() const { return config_; }
  // Blocks until `stop` becomes true.
  void run(const std::atomic<bool>& stop);

 private:
  void serve_client(int fd, const std::atomic<bool>& stop);

  DeviceConfig config_;
  int listen_fd_ = -1;
  int port_ = 0;
};

}  // namespace bls
