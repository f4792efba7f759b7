#include "bls/manikin.hpp"

#include <algorithm>
#include <fstream>

#include "bls/error.hpp"

namespace bls {

using nlohmann::json;

void DeviceConfig::validate() const {
  if (sample_rate_hz < 5 || sample_rate_hz > 100) {
    throw Error(ErrorCode::InvalidArgument, "sample_rate_hz must be within 5..100");
  }
  if (!(noise_sigma_cm >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise_sigma_cm must be >= 0");
  if (!(max_travel_cm > 0.0)) throw Error(ErrorCode::InvalidArgument, "max_travel_cm must be > 0");
  if (!(rest_height_cm > max_travel_cm)) {
    throw Error(ErrorCode::InvalidArgument, "rest_height_cm must exceed max_travel_cm");
  }
}

json to_json(const DeviceConfig& c) {
  return {{"rest_height_cm", c.rest_height_cm},
          {"sample_rate_hz", c.sample_rate_hz},
          {"noise_sigma_cm", c.noise_sigma_cm},
          {"seed", c.seed},
          {"gyro", c.gyro_present},
          {"max_travel_cm", c.max_travel_cm},
          {"clock", c.clock == DeviceClock::Realtime ? "realtime" : "stepped"}};
}

DeviceConfig device_config_from_json(const json& j) {
  try {
    DeviceConfig c;
    c.rest_height_cm = j.value("rest_height_cm", c.rest_height_cm);
    c.sample_rate_hz = j.value("sample_rate_hz", c.sample_rate_hz);
    c.noise_sigma_cm = j.value("noise_sigma_cm", c.noise_sigma_cm);
    c.seed = j.value("seed", c.seed);
    c.gyro_present = j.value("gyro", c.gyro_present);
    c.max_travel_cm = j.value("max_travel_cm", c.max_travel_cm);
    const auto clock = j.value("clock", std::string("realtime"));
    if (clock == "realtime") c.clock = DeviceClock::Realtime;
    else if (clock == "stepped") c.clock = DeviceClock::Stepped;
    else throw Error(ErrorCode::InvalidArgument, "clock must be realtime or stepped");
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("device config: ") + e.what());
  }
}

DeviceConfig load_device_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open device config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, "device config " + path + ": " + e.what());
  }
  return device_config_from_json(j);
}

ManikinDevice::ManikinDevice(DeviceConfig config) : config_(config), rng_(config.seed) {
  config_.validate();
}

wire::Ack ManikinDevice::ack(std::string echo) const {
  return wire::Ack{std::move(echo), state_.distance_streaming,
                   state_.gyro_streaming && config_.gyro_present};
}

wire::Ack ManikinDevice::handleCommand(const wire::Command& cmd) {
  const bool dist = cmd.target != wire::Target::Gyro;
  const bool gyro = cmd.target != wire::Target::Distance;
  switch (cmd.verb) {
    case wire::Verb::Start:
      if (dist) state_.distance_streaming = true;
      if (gyro) state_.gyro_streaming = true;
      break;
    case wire::Verb::Stop:
      if (dist) state_.distance_streaming = false;
      if (gyro) state_.gyro_streaming = false;
      break;
    case wire::Verb::Reset:
      state_.clock_ms = 0;
      state_.applied_depth_cm = 0.0;
      sample_index_ = 0;
      pulse_depth_cm_ = 0.0;
      pulse_end_ms_ = 0;
      break;
  }
  return ack(std::string(wire::to_string(cmd.verb)) + " " + std::string(wire::to_string(cmd.target)));
}

std::vector<std::string> ManikinDevice::handleLine(std::string_view line) {
  wire::Frame frame;
  try {
    frame = wire::parse(line);
  } catch (const Error& e) {
    std::string msg = e.what();
    const auto colon = msg.find(": ");
    if (colon != std::string::npos) msg = msg.substr(colon + 2);
    return {wire::format(wire::ErrorFrame{"malformed", msg})};
  }
  if (const auto* cmd = std::get_if<wire::Command>(&frame)) {
    return {wire::format(handleCommand(*cmd))};
  }
  if (const auto* sim = std::get_if<wire::SimCommand>(&frame)) {
    try {
      std::vector<std::string> out;
      std::string echo;
      switch (sim->verb) {
        case wire::SimVerb::Push:
          if (sim->duration_ms <= 0) throw Error(ErrorCode::OutOfRange, "duration must be > 0");
          pulse(sim->value, sim->duration_ms);
          break;
        case wire::SimVerb::Depth: applyCompression(sim->value); break;
        case wire::SimVerb::Tilt: setHeadPitch(sim->value); break;
        case wire::SimVerb::Tick:
          if (config_.clock != DeviceClock::Stepped) {
            return {wire::format(wire::ErrorFrame{"unexpected", "SIM TICK needs a stepped clock"})};
          }
          if (sim->value <= 0) throw Error(ErrorCode::OutOfRange, "tick must be > 0");
          out = tick(static_cast<TimestampMs>(sim->value));
          break;
      }
      echo = wire::format(*sim);
      echo.pop_back();
      out.push_back(wire::format(ack(echo)));
      return out;
    } catch (const Error& e) {
      std::string msg = e.what();
      const auto colon = msg.find(": ");
      if (colon != std::string::npos) msg = msg.substr(colon + 2);
      return {wire::format(wire::ErrorFrame{"range", msg})};
    }
  }
  return {wire::format(wire::ErrorFrame{"unexpected", "device accepts CMD and SIM frames only"})};
}

void ManikinDevice::applyCompression(double depth_cm) {
  if (depth_cm < 0.0) throw Error(ErrorCode::OutOfRange, "depth must be >= 0");
  state_.applied_depth_cm = std::min(depth_cm, config_.max_travel_cm);
}

void ManikinDevice::pulse(double depth_cm, std::int64_t duration_ms) {
  if (depth_cm < 0.0) throw Error(ErrorCode::OutOfRange, "depth must be >= 0");
  pulse_depth_cm_ = std::min(depth_cm, config_.max_travel_cm);
  pulse_end_ms_ = state_.clock_ms + duration_ms;
}

void ManikinDevice::setHeadPitch(double degrees) {
  if (degrees < -45.0 || degrees > 60.0) {
    throw Error(ErrorCode::OutOfRange, "head pitch must be within -45..60 degrees");
  }
  state_.head_pitch_deg = degrees;
}

double ManikinDevice::effectiveDepthAt(TimestampMs t) const {
  if (t < pulse_end_ms_) return std::max(pulse_depth_cm_, state_.applied_depth_cm);
  return state_.applied_depth_cm;
}

TimestampMs ManikinDevice::nextSampleTs() const {
  return (sample_index_ + 1) * 1000 / config_.sample_rate_hz;
}

std::vector<std::string> ManikinDevice::tick(TimestampMs dt_ms) {
  if (dt_ms <= 0) throw Error(ErrorCode::InvalidArgument, "tick needs dt > 0");
  return advanceTo(state_.clock_ms + dt_ms);
}

std::vector<std::string> ManikinDevice::advanceTo(TimestampMs t) {
  std::vector<std::string> frames;
  while (nextSampleTs() <= t) {
    const TimestampMs ts = nextSampleTs();
    ++sample_index_;
    if (state_.distance_streaming) {
      double d = config_.rest_height_cm - effectiveDepthAt(ts);
      if (config_.noise_sigma_cm > 0.0) d += config_.noise_sigma_cm * noise_(rng_);
      frames.push_back(wire::format_sample(SensorKind::Distance, std::max(0.0, wire::quantize(d)), ts));
    }
    if (state_.gyro_streaming && config_.gyro_present) {
      frames.push_back(wire::format_sample(SensorKind::Gyro, state_.head_pitch_deg, ts));
    }
  }
  state_.clock_ms = std::max(state_.clock_ms, t);
  return frames;
}

}  // namespace bls
