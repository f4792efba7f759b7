#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bls/device_link.hpp"
#include "bls/manikin.hpp"
#include "bls/session.hpp"

namespace bls {

inline constexpr int kScriptSchema = 1;

struct Compression {
  TimestampMs start_ms = 0;
  double depth_cm = 0.0;
  TimestampMs duration_ms = 0;
};

struct TiltStep {
  TimestampMs ts = 0;
  double degrees = 0.0;
};

// A scripted trainee: timed UI events plus what the hands do on the manikin.
struct ScenarioScript {
  std::string trainee = "anonymous";
  std::string started_at = "1970-01-01T00:00:00Z";
  std::optional<Scenario> scenario;  // default sequence when absent
  DeviceConfig device;
  SessionConfig config;
  std::vector<SessionEvent> events;
  std::vector<Compression> compressions;
  std::vector<TiltStep> tilt;
  TimestampMs end_ms = 0;
  bool abort = false;

  // Throws Error(ScriptViolation) on non-increasing timestamps, overlapping compressions,
  // depths outside the device travel or device-derived events in the event list.
  void validate() const;
};

nlohmann::json to_json(const ScenarioScript& s);
ScenarioScript script_from_json(const nlohmann::json& j);
ScenarioScript load_script(const std::string& path);

struct RunOptions {
  TrainingMode mode = TrainingMode::Training;
  std::optional<std::uint64_t> seed;  // overrides the script's device seed
  std::string session_id;             // derived from the inputs when empty
};

struct RunResult {
  SessionLog log;
  // Set when the device went away mid-session; the log is then sealed as aborted.
  std::optional<std::string> device_error;
};

// Drives a full session from the script. With no channel an in-process stepped device is
// used; a remote channel must be a stepped-clock device. Device and engine advance in
// lockstep, so the result depends only on (script, options).
RunResult runScript(const ScenarioScript& script, const RunOptions& options, DeviceChannel* remote = nullptr);

std::string derive_session_id(const ScenarioScript& script, const RunOptions& options);

}  // namespace bls
