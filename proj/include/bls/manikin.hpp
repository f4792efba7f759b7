#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bls/wire.hpp"

namespace bls {

enum class DeviceClock { Realtime, Stepped };

struct DeviceConfig {
  double rest_height_cm = 20.0;
  int sample_rate_hz = 20;
  double noise_sigma_cm = 0.05;
  std::uint64_t seed = 1;
  bool gyro_present = true;
  double max_travel_cm = 6.5;
  // Realtime devices advance with the wall clock; stepped devices only on "SIM TICK".
  DeviceClock clock = DeviceClock::Realtime;

  void validate() const;
};

nlohmann::json to_json(const DeviceConfig& c);
DeviceConfig device_config_from_json(const nlohmann::json& j);
DeviceConfig load_device_config(const std::string& path);

struct DeviceState {
  double applied_depth_cm = 0.0;
  double head_pitch_deg = 0.0;
  bool distance_streaming = false;
  bool gyro_streaming = false;
  TimestampMs clock_ms = 0;
};

// Virtual sensor manikin: spring chest over an ultrasonic distance sensor plus a head gyro.
// Owns its clock; frames are produced only by tick(). Not thread-safe.
class ManikinDevice {
 public:
  explicit ManikinDevice(DeviceConfig config = {});

  const DeviceConfig& config() const { return config_; }
  const DeviceState& state() const { return state_; }

  wire::Ack handleCommand(const wire::Command& cmd);

  // Processes one inbound line. Returns the reply line (ACK or ERR); malformed input
  // leaves the device untouched. SIM TICK additionally returns the frames it produced
  // ahead of its ACK.
  std::vector<std::string> handleLine(std::string_view line);

  // Sets the externally applied depth, clamped to max travel. Throws on negative depth.
  void applyCompression(double depth_cm);
  // Holds `depth_cm` for `duration_ms` from the current clock, then releases.
  void pulse(double depth_cm, std::int64_t duration_ms);
  // Throws Error(OutOfRange) outside [-45, 60] degrees.
  void setHeadPitch(double degrees);

  // Advances the clock by dt (> 0) and returns every sample frame due in that interval.
  std::vector<std::string> tick(TimestampMs dt_ms);
  // Advances to an absolute device time; no-op when `t` is not in the future.
  std::vector<std::string> advanceTo(TimestampMs t);

  TimestampMs nextSampleTs() const;
  double effectiveDepthAt(TimestampMs t) const;

 private:
  wire::Ack ack(std::string echo) const;

  DeviceConfig config_;
  DeviceState state_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> noise_{0.0, 1.0};
  std::int64_t sample_index_ = 0;
  double pulse_depth_cm_ = 0.0;
  TimestampMs pulse_end_ms_ = 0;
};

}  // namespace bls
