#include "bls/device_link.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "bls/error.hpp"

namespace bls {

namespace {

using Clock = std::chrono::steady_clock;

bool is_reply(const std::string& line) { return line.rfind("ACK ", 0) == 0 || line.rfind("ERR ", 0) == 0; }

bool send_all(int fd, const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace

std::string DeviceChannel::command(const std::string& line) {
  const auto replies = exchange(line);
  if (replies.empty()) throw Error(ErrorCode::DeviceUnreachable, "no reply to " + line);
  return replies.back();
}

std::pair<std::string, int> parse_address(const std::string& addr) {
  std::string host = "127.0.0.1";
  std::string port_text = addr;
  const auto colon = addr.rfind(':');
  if (colon != std::string::npos) {
    if (colon > 0) host = addr.substr(0, colon);
    port_text = addr.substr(colon + 1);
  }
  int port = 0;
  try {
    std::size_t used = 0;
    port = std::stoi(port_text, &used);
    if (used != port_text.size()) throw std::invalid_argument(port_text);
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, "bad device address '" + addr + "'");
  }
  if (port <= 0 || port > 65535) throw Error(ErrorCode::InvalidArgument, "bad port in '" + addr + "'");
  return {host, port};
}

TcpDeviceChannel::TcpDeviceChannel(const std::string& host, int port, std::chrono::milliseconds timeout)
    : timeout_(timeout) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res) {
    throw Error(ErrorCode::DeviceUnreachable, "cannot resolve " + host);
  }
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  const int rc = fd_ < 0 ? -1 : ::connect(fd_, res->ai_addr, res->ai_addrlen);
  ::freeaddrinfo(res);
  if (rc != 0) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
    throw Error(ErrorCode::DeviceUnreachable,
                "cannot connect to " + host + ":" + std::to_string(port) + ": " + std::strerror(errno));
  }
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

TcpDeviceChannel::~TcpDeviceChannel() {
  if (fd_ >= 0) ::close(fd_);
}

std::string TcpDeviceChannel::read_line() {
  const auto deadline = Clock::now() + timeout_;
  while (true) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl + 1);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    if (left <= 0) throw Error(ErrorCode::DeviceUnreachable, "device reply timed out");
    pollfd p{fd_, POLLIN, 0};
    const int ready = ::poll(&p, 1, static_cast<int>(left));
    if (ready < 0 && errno == EINTR) continue;
    if (ready <= 0) continue;
    char chunk[4096];
    const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw Error(ErrorCode::DeviceUnreachable, "device closed the connection");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::vector<std::string> TcpDeviceChannel::exchange(const std::string& line) {
  std::string out = line;
  if (out.empty() || out.back() != '\n') out += '\n';
  if (fd_ < 0 || !send_all(fd_, out)) throw Error(ErrorCode::DeviceUnreachable, "device connection lost");
  std::vector<std::string> lines;
  while (true) {
    lines.push_back(read_line());
    if (is_reply(lines.back())) return lines;
  }
}

DeviceServer::DeviceServer(DeviceConfig config, int port) : config_(std::move(config)) {
  config_.validate();
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error(ErrorCode::Io, std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 4) != 0) {
    const std::string why = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error(ErrorCode::Io, "port " + std::to_string(port) + " busy: " + why);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

DeviceServer::~DeviceServer() {
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void DeviceServer::run(const std::atomic<bool>& stop) {
  while (!stop) {
    pollfd p{listen_fd_, POLLIN, 0};
    if (::poll(&p, 1, 50) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    serve_client(fd, stop);
    ::close(fd);
  }
}

void DeviceServer::serve_client(int fd, const std::atomic<bool>& stop) {
  ManikinDevice device(config_);
  const bool realtime = config_.clock == DeviceClock::Realtime;
  auto origin = Clock::now();
  std::string buffer;
  auto device_now = [&] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - origin).count();
  };

  while (!stop) {
    if (realtime) {
      std::string frames;
      for (const auto& f : device.advanceTo(device_now())) frames += f;
      if (!frames.empty() && !send_all(fd, frames)) return;
    }
    pollfd p{fd, POLLIN, 0};
    const int ready = ::poll(&p, 1, realtime ? 5 : 50);
    if (ready <= 0) continue;
    char chunk[4096];
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n <= 0) return;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t nl;
    while ((nl = buffer.find('\n')) != std::string::npos) {
      const std::string line = buffer.substr(0, nl + 1);
      buffer.erase(0, nl + 1);
      if (realtime) {
        // Frames due before the command must precede its reply.
        std::string frames;
        for (const auto& f : device.advanceTo(device_now())) frames += f;
        if (!frames.empty() && !send_all(fd, frames)) return;
      }
      const TimestampMs before = device.state().clock_ms;
      std::string reply;
      for (const auto& r : device.handleLine(line)) reply += r;
      if (realtime && device.state().clock_ms < before) {
        origin = Clock::now() - std::chrono::milliseconds(device.state().clock_ms);
      }
      if (!send_all(fd, reply)) return;
    }
    if (buffer.size() > 4096) {
      if (!send_all(fd, "ERR malformed line too long\n")) return;
      buffer.clear();
    }
  }
}

}  // namespace bls
