#pragma once

#include <string>
#include <string_view>
#include <variant>

#include "bls/cpr.hpp"

namespace bls::wire {

// Line grammar, one frame per line:
//   CMD <START|STOP|RESET> <distance|gyro|all>
//   ACK <verb> <sensor> <bitmap>          bitmap = distance bit, gyro bit ("10")
//   SMP <distance|gyro> <value, 1 decimal> <ts_ms>
//   ERR <code> <message>
// Simulator actuation (not part of the sensor protocol; real manikins are pushed by hand):
//   SIM PUSH <depth_cm> <duration_ms>
//   SIM DEPTH <depth_cm>
//   SIM TILT <degrees>
//   SIM TICK <dt_ms>
// and their acknowledgement "ACK SIM <verb> <arg...> <bitmap>".

enum class Verb { Start, Stop, Reset };
enum class Target { Distance, Gyro, All };

std::string_view to_string(Verb v);
std::string_view to_string(Target t);

struct Command {
  Verb verb = Verb::Start;
  Target target = Target::All;
};

struct Ack {
  std::string echo;  // "START distance", "SIM PUSH 5.5 300", ...
  bool distance_streaming = false;
  bool gyro_streaming = false;
};

struct Sample {
  SensorKind sensor = SensorKind::Distance;
  double value = 0.0;
  TimestampMs ts = 0;
};

struct ErrorFrame {
  std::string code;
  std::string message;
};

enum class SimVerb { Push, Depth, Tilt, Tick };

struct SimCommand {
  SimVerb verb = SimVerb::Push;
  double value = 0.0;
  std::int64_t duration_ms = 0;  // PUSH only
};

using Frame = std::variant<Command, Ack, Sample, ErrorFrame, SimCommand>;

// Throws Error(MalformedFrame). Accepts the line with or without its trailing '\n'.
Frame parse(std::string_view line);

// All formatters append the terminating '\n'.
std::string format(const Frame& frame);
std::string format_sample(SensorKind sensor, double value, TimestampMs ts);

// Round half away from zero to one decimal, the resolution of every wire value.
double quantize(double value);

SensorSample to_sensor_sample(const Sample& s);

}  // namespace bls::wire
