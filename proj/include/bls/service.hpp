#pragma once

#include <memory>
#include <optional>
#include <string>

#include "bls/manikin.hpp"

namespace bls {

struct ServiceOptions {
  std::string scenarios_dir;            // extra scenario files (*.json); "default" is built in
  std::string history_dir;              // debriefs are saved here on finish when set
  std::string log_dir;                  // sealed session logs are written here when set
  std::optional<std::string> device_addr;  // remote stepped-clock device; in-process otherwise
  DeviceConfig device;                  // in-process device settings
  TimestampMs pump_interval_ms = 20;
};

// HTTP front end for live sessions:
//   GET  /scenarios
//   POST /sessions                      {"trainee", "mode", "scenario"?} -> {"session_id", ...}
//   POST /sessions/{id}/events          {"kind", ...payload} -> {"feedback": [...]}
//   POST /sessions/{id}/compressions    {"depth_cm", "duration_ms"}
//   POST /sessions/{id}/tilt            {"degrees"}
//   GET  /sessions/{id}/feedback        server-sent events, one feedback record each
//   POST /sessions/{id}/finish          {"abort"?} -> debrief document
//   GET  /sessions/{id}/report?format=structured|text
// UI events are stamped by the server. Each session is driven by its own pump thread
// that steps the device with the wall clock; all engine access is serialized per session.
class TrainerService {
 public:
  explicit TrainerService(ServiceOptions options);
  ~TrainerService();
  TrainerService(const TrainerService&) = delete;
  TrainerService& operator=(const TrainerService&) = delete;

  // Binds to 127.0.0.1; port 0 picks a free port. Throws Error(Io) when busy.
  int bind(int port);
  // Blocks until stop() is called.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace bls
