#include <doctest.h>

#include <thread>

#include "bls/device_link.hpp"
#include "bls/error.hpp"
#include "bls/script.hpp"
#include "bls/session_log.hpp"

using namespace bls;

namespace {

struct RunningServer {
  std::atomic<bool> stop{false};
  DeviceServer server;
  std::thread thread;

  explicit RunningServer(DeviceConfig cfg, int port = 0) : server(std::move(cfg), port) {
    thread = std::thread([this] { server.run(stop); });
  }
  ~RunningServer() {
    stop = true;
    thread.join();
  }
};

DeviceConfig stepped() {
  DeviceConfig c;
  c.clock = DeviceClock::Stepped;
  c.noise_sigma_cm = 0.05;
  c.seed = 1;
  return c;
}

}  // namespace

TEST_CASE("address parsing") {
  CHECK(parse_address("10.0.0.2:7000") == std::pair<std::string, int>{"10.0.0.2", 7000});
  CHECK(parse_address(":7001") == std::pair<std::string, int>{"127.0.0.1", 7001});
  CHECK(parse_address("7002") == std::pair<std::string, int>{"127.0.0.1", 7002});
  CHECK_THROWS_AS(parse_address("host:"), Error);
  CHECK_THROWS_AS(parse_address("host:99999"), Error);
}

TEST_CASE("TCP device answers like the in-process one") {
  RunningServer srv(stepped());
  TcpDeviceChannel tcp("127.0.0.1", srv.server.port());
  LocalDeviceChannel local(stepped());
  for (const char* line : {"CMD RESET all", "CMD START all", "SIM PUSH 5.5 250", "SIM TICK 1000", "CMD BOGUS",
                           "SIM TILT 25.0", "SIM TICK 200", "CMD STOP gyro", "SIM TICK 200"}) {
    CAPTURE(line);
    CHECK(tcp.exchange(std::string(line) + "\n") == local.exchange(std::string(line) + "\n"));
  }
  CHECK(tcp.command("CMD START distance\n").rfind("ACK START distance", 0) == 0);
}

TEST_CASE("a script over TCP gives the same log as in process") {
  const auto script = load_script(std::string(BLS_FIXTURE_DIR) + "/scripts/perfect.json");
  RunningServer srv(script.device);
  TcpDeviceChannel tcp("127.0.0.1", srv.server.port());
  const auto remote = runScript(script, RunOptions{}, &tcp);
  const auto local = runScript(script, RunOptions{});
  CHECK_FALSE(remote.device_error);
  CHECK(log_lines(remote.log, "t") == log_lines(local.log, "t"));
  CHECK(remote.log.sensor_trace == local.log.sensor_trace);
}

TEST_CASE("busy ports and absent servers") {
  RunningServer srv(stepped());
  try {
    DeviceServer clash(stepped(), srv.server.port());
    FAIL("expected Io");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Io);
  }

  int free_port = 0;
  {
    DeviceServer probe(stepped(), 0);
    free_port = probe.port();
  }
  try {
    TcpDeviceChannel("127.0.0.1", free_port);
    FAIL("expected DeviceUnreachable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DeviceUnreachable);
  }
}

TEST_CASE("gyro-absent devices report the gyro as off") {
  auto cfg = stepped();
  cfg.gyro_present = false;
  RunningServer srv(cfg);
  TcpDeviceChannel tcp("127.0.0.1", srv.server.port());
  CHECK(tcp.command("CMD START gyro\n") == "ACK START gyro 00\n");
  CHECK(tcp.command("CMD START all\n") == "ACK START all 10\n");
  const auto frames = tcp.exchange("SIM TICK 500\n");
  for (std::size_t i = 0; i + 1 < frames.size(); ++i) CHECK(frames[i].find("gyro") == std::string::npos);
}

TEST_CASE("realtime devices refuse stepped ticks") {
  auto cfg = stepped();
  cfg.clock = DeviceClock::Realtime;
  RunningServer srv(cfg);
  TcpDeviceChannel tcp("127.0.0.1", srv.server.port());
  CHECK(tcp.command("SIM TICK 100\n").rfind("ERR ", 0) == 0);
}
