#include "bls/wire.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <vector>

#include "bls/error.hpp"

namespace bls::wire {

std::string_view to_string(Verb v) {
  switch (v) {
    case Verb::Start: return "START";
    case Verb::Stop: return "STOP";
    case Verb::Reset: return "RESET";
  }
  return "?";
}

std::string_view to_string(Target t) {
  switch (t) {
    case Target::Distance: return "distance";
    case Target::Gyro: return "gyro";
    case Target::All: return "all";
  }
  return "?";
}

namespace {

[[noreturn]] void malformed(const std::string& why) { throw Error(ErrorCode::MalformedFrame, why); }

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    std::size_t j = line.find(' ', i);
    if (j == std::string_view::npos) j = line.size();
    if (j == i) malformed("empty field");
    out.push_back(line.substr(i, j - i));
    i = j + 1;
    if (j + 1 == line.size()) malformed("trailing space");
  }
  return out;
}

// Strict "-?[0-9]+(\.[0-9]+)?" with an optional exact decimal count.
bool is_decimal(std::string_view s, int required_decimals) {
  std::size_t i = 0;
  if (i < s.size() && s[i] == '-') ++i;
  const std::size_t int_start = i;
  while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
  if (i == int_start || i - int_start > 6) return false;
  if (i == s.size()) return required_decimals <= 0;
  if (s[i] != '.') return false;
  const std::size_t frac_start = ++i;
  while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
  if (i != s.size() || i == frac_start) return false;
  return required_decimals < 0 || static_cast<int>(i - frac_start) == required_decimals;
}

double to_double(std::string_view s) { return std::strtod(std::string(s).c_str(), nullptr); }

std::int64_t to_int(std::string_view s) {
  if (s.empty() || s.size() > 15) malformed("bad integer '" + std::string(s) + "'");
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v < 0) {
    malformed("bad integer '" + std::string(s) + "'");
  }
  return v;
}

SensorKind sensor_of(std::string_view s) {
  if (s == "distance") return SensorKind::Distance;
  if (s == "gyro") return SensorKind::Gyro;
  malformed("unknown sensor '" + std::string(s) + "'");
}

bool bit(char c) {
  if (c == '0') return false;
  if (c == '1') return true;
  malformed("bad bitmap");
}

std::string fixed1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", quantize(v));
  std::string s(buf);
  if (s == "-0.0") s = "0.0";
  return s;
}

}  // namespace

double quantize(double value) { return std::round(value * 10.0) / 10.0; }

Frame parse(std::string_view line) {
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  if (line.empty()) malformed("empty line");
  if (line.size() > 256) malformed("line too long");
  for (char c : line) {
    if (static_cast<unsigned char>(c) < 0x20 || static_cast<unsigned char>(c) == 0x7f) {
      malformed("control character");
    }
  }
  const auto f = split(line);
  const auto head = f[0];

  if (head == "CMD") {
    if (f.size() != 3) malformed("expected CMD <verb> <sensor>");
    Command c;
    if (f[1] == "START") c.verb = Verb::Start;
    else if (f[1] == "STOP") c.verb = Verb::Stop;
    else if (f[1] == "RESET") c.verb = Verb::Reset;
    else malformed("unknown verb '" + std::string(f[1]) + "'");
    if (f[2] == "distance") c.target = Target::Distance;
    else if (f[2] == "gyro") c.target = Target::Gyro;
    else if (f[2] == "all") c.target = Target::All;
    else malformed("unknown sensor '" + std::string(f[2]) + "'");
    return c;
  }
  if (head == "SMP") {
    if (f.size() != 4) malformed("expected SMP <sensor> <value> <ts>");
    Sample s;
    s.sensor = sensor_of(f[1]);
    if (!is_decimal(f[2], 1)) malformed("value needs exactly one decimal");
    s.value = to_double(f[2]);
    if (s.sensor == SensorKind::Distance && s.value < 0.0) malformed("negative distance");
    s.ts = to_int(f[3]);
    return s;
  }
  if (head == "ACK") {
    if (f.size() < 3) malformed("expected ACK <echo> <bitmap>");
    const auto bitmap = f.back();
    if (bitmap.size() != 2) malformed("bitmap needs two bits");
    Ack a;
    a.distance_streaming = bit(bitmap[0]);
    a.gyro_streaming = bit(bitmap[1]);
    std::string echo;
    for (std::size_t i = 1; i + 1 < f.size(); ++i) {
      if (!echo.empty()) echo += ' ';
      echo += f[i];
    }
    a.echo = std::move(echo);
    return a;
  }
  if (head == "ERR") {
    if (f.size() < 2) malformed("expected ERR <code> <message>");
    ErrorFrame e;
    e.code = std::string(f[1]);
    const std::size_t at = 4 + f[1].size() + 1;
    if (at < line.size()) e.message = std::string(line.substr(at));
    return e;
  }
  if (head == "SIM") {
    if (f.size() < 3) malformed("expected SIM <verb> <args>");
    SimCommand c;
    if (f[1] == "PUSH") {
      if (f.size() != 4) malformed("expected SIM PUSH <depth> <duration_ms>");
      c.verb = SimVerb::Push;
      c.duration_ms = to_int(f[3]);
    } else if (f[1] == "DEPTH" || f[1] == "TILT" || f[1] == "TICK") {
      if (f.size() != 3) malformed("expected SIM <verb> <value>");
      c.verb = f[1] == "DEPTH" ? SimVerb::Depth : f[1] == "TILT" ? SimVerb::Tilt : SimVerb::Tick;
    } else {
      malformed("unknown SIM verb '" + std::string(f[1]) + "'");
    }
    if (c.verb == SimVerb::Tick) {
      c.value = static_cast<double>(to_int(f[2]));
    } else {
      if (!is_decimal(f[2], -1)) malformed("bad number '" + std::string(f[2]) + "'");
      c.value = to_double(f[2]);
    }
    return c;
  }
  malformed("unknown frame type '" + std::string(head) + "'");
}

std::string format_sample(SensorKind sensor, double value, TimestampMs ts) {
  return "SMP " + std::string(bls::to_string(sensor)) + " " + fixed1(value) + " " +
         std::to_string(ts) + "\n";
}

std::string format(const Frame& frame) {
  return std::visit(
      [](const auto& f) -> std::string {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, Command>) {
          return "CMD " + std::string(to_string(f.verb)) + " " + std::string(to_string(f.target)) + "\n";
        } else if constexpr (std::is_same_v<T, Ack>) {
          return "ACK " + f.echo + " " + (f.distance_streaming ? "1" : "0") +
                 (f.gyro_streaming ? "1" : "0") + "\n";
        } else if constexpr (std::is_same_v<T, Sample>) {
          return format_sample(f.sensor, f.value, f.ts);
        } else if constexpr (std::is_same_v<T, ErrorFrame>) {
          return "ERR " + f.code + (f.message.empty() ? "" : " " + f.message) + "\n";
        } else {
          switch (f.verb) {
            case SimVerb::Push:
              return "SIM PUSH " + fixed1(f.value) + " " + std::to_string(f.duration_ms) + "\n";
            case SimVerb::Depth: return "SIM DEPTH " + fixed1(f.value) + "\n";
            case SimVerb::Tilt: return "SIM TILT " + fixed1(f.value) + "\n";
            case SimVerb::Tick:
              return "SIM TICK " + std::to_string(static_cast<std::int64_t>(f.value)) + "\n";
          }
          return "";
        }
      },
      frame);
}

SensorSample to_sensor_sample(const Sample& s) { return SensorSample{s.sensor, s.value, s.ts}; }

}  // namespace bls::wire
