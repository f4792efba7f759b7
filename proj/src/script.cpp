#include "bls/script.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "bls/error.hpp"
#include "bls/session_log.hpp"

namespace bls {

using nlohmann::json;

namespace {

[[noreturn]] void violation(const std::string& msg) { throw Error(ErrorCode::ScriptViolation, msg); }

std::string fixed1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

void expect_ack(const std::vector<std::string>& replies, const std::string& line) {
  if (replies.empty() || replies.back().rfind("ACK ", 0) != 0) {
    const std::string got = replies.empty() ? "nothing" : replies.back().substr(0, replies.back().size() - 1);
    throw Error(ErrorCode::DeviceUnreachable, "device rejected '" + line + "': " + got);
  }
}

}  // namespace

void ScenarioScript::validate() const {
  try {
    device.validate();
    config.cpr.validate();
  } catch (const Error& e) {
    violation(e.what());
  }
  if (scenario) {
    const auto v = validateSequence(scenario->graph);
    if (!v.empty()) violation("scenario graph is invalid: " + v.front().detail);
  }
  TimestampMs last_end = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (e.ts < 0) violation("event " + std::to_string(i) + " has a negative timestamp");
    if (i > 0 && e.ts <= events[i - 1].ts) violation("event timestamps must strictly increase at index " + std::to_string(i));
    const auto type = type_of(e.kind);
    if (type == EventType::CompressionPush || type == EventType::HeadTiltReached) {
      violation("event " + std::to_string(i) + " is derived from the device; use the compression or tilt profile");
    }
    last_end = std::max(last_end, e.ts);
  }
  for (std::size_t i = 0; i < compressions.size(); ++i) {
    const auto& c = compressions[i];
    if (c.start_ms < 0) violation("compression " + std::to_string(i) + " starts before 0");
    if (c.duration_ms <= 0) violation("compression " + std::to_string(i) + " needs a positive duration");
    if (c.depth_cm <= 0.0 || c.depth_cm > device.max_travel_cm) {
      violation("compression " + std::to_string(i) + " depth " + fixed1(c.depth_cm) + " cm is outside the device travel");
    }
    if (i > 0) {
      const auto& p = compressions[i - 1];
      if (c.start_ms <= p.start_ms) violation("compression starts must strictly increase at index " + std::to_string(i));
      if (c.start_ms < p.start_ms + p.duration_ms) violation("compression " + std::to_string(i) + " overlaps the previous one");
    }
    last_end = std::max(last_end, c.start_ms + c.duration_ms);
  }
  for (std::size_t i = 0; i < tilt.size(); ++i) {
    const auto& t = tilt[i];
    if (t.ts < 0) violation("tilt step " + std::to_string(i) + " has a negative timestamp");
    if (i > 0 && t.ts <= tilt[i - 1].ts) violation("tilt timestamps must strictly increase at index " + std::to_string(i));
    if (t.degrees < -45.0 || t.degrees > 60.0) violation("tilt step " + std::to_string(i) + " is outside -45..60 degrees");
    last_end = std::max(last_end, t.ts);
  }
  if (end_ms < last_end) violation("end_ms " + std::to_string(end_ms) + " precedes the last scripted action");
}

json to_json(const ScenarioScript& s) {
  json events = json::array();
  for (const auto& e : s.events) {
    json j = to_json(e.kind);
    j["ts"] = e.ts;
    events.push_back(j);
  }
  json comps = json::array();
  for (const auto& c : s.compressions) {
    comps.push_back({{"start_ms", c.start_ms}, {"depth_cm", c.depth_cm}, {"duration_ms", c.duration_ms}});
  }
  json tilt = json::array();
  for (const auto& t : s.tilt) tilt.push_back({{"ts", t.ts}, {"degrees", t.degrees}});
  json j = {{"schema", kScriptSchema},
            {"trainee", s.trainee},
            {"started_at", s.started_at},
            {"device", to_json(s.device)},
            {"config", to_json(s.config)},
            {"events", events},
            {"compressions", comps},
            {"tilt", tilt},
            {"end_ms", s.end_ms},
            {"abort", s.abort}};
  if (s.scenario) j["scenario"] = to_json(*s.scenario);
  return j;
}

ScenarioScript script_from_json(const json& j) {
  try {
    const int schema = j.value("schema", 0);
    if (schema != kScriptSchema) {
      throw Error(ErrorCode::SchemaMismatch, "script schema " + std::to_string(schema) + ", expected " +
                                                 std::to_string(kScriptSchema));
    }
    ScenarioScript s;
    s.trainee = j.value("trainee", s.trainee);
    s.started_at = j.value("started_at", s.started_at);
    if (j.contains("scenario")) s.scenario = scenario_from_json(j.at("scenario"));
    if (j.contains("device")) s.device = device_config_from_json(j.at("device"));
    if (j.contains("config")) s.config = session_config_from_json(j.at("config"));
    for (const auto& e : j.value("events", json::array())) {
      SessionEvent ev;
      ev.ts = e.at("ts").get<TimestampMs>();
      ev.kind = event_kind_from_json(e);
      ev.source = EventSource::Script;
      s.events.push_back(ev);
    }
    for (const auto& c : j.value("compressions", json::array())) {
      s.compressions.push_back(Compression{c.at("start_ms").get<TimestampMs>(), c.at("depth_cm").get<double>(),
                                           c.at("duration_ms").get<TimestampMs>()});
    }
    for (const auto& t : j.value("tilt", json::array())) {
      s.tilt.push_back(TiltStep{t.at("ts").get<TimestampMs>(), t.at("degrees").get<double>()});
    }
    s.end_ms = j.at("end_ms").get<TimestampMs>();
    s.abort = j.value("abort", false);
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ScriptViolation, std::string("script: ") + e.what());
  }
}

ScenarioScript load_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open script " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ScriptViolation, path + ": " + e.what());
  }
  return script_from_json(j);
}

std::string derive_session_id(const ScenarioScript& script, const RunOptions& options) {
  std::string key = to_json(script).dump();
  key += '|';
  key += to_string(options.mode);
  key += '|';
  key += std::to_string(options.seed.value_or(script.device.seed));
  return "s" + fnv1a64(key).substr(0, 12);
}

RunResult runScript(const ScenarioScript& script, const RunOptions& options, DeviceChannel* remote) {
  script.validate();
  DeviceConfig device_config = script.device;
  device_config.clock = DeviceClock::Stepped;
  if (options.seed) device_config.seed = *options.seed;
  LocalDeviceChannel local(device_config);
  DeviceChannel& device = remote ? *remote : static_cast<DeviceChannel&>(local);

  SessionMeta meta;
  meta.session_id = options.session_id.empty() ? derive_session_id(script, options) : options.session_id;
  meta.trainee = script.trainee;
  meta.started_at = script.started_at;
  meta.start_ts = 0;

  Session session = Session::start(script.scenario.value_or(defaultScenario()), options.mode, script.config,
                                   std::move(meta), &device);

  std::set<TimestampMs> stops;
  for (const auto& e : script.events) stops.insert(e.ts);
  for (const auto& c : script.compressions) stops.insert(c.start_ms);
  for (const auto& t : script.tilt) stops.insert(t.ts);
  for (TimestampMs t = 1000; t <= script.end_ms; t += 1000) stops.insert(t);
  stops.insert(script.end_ms);

  RunResult result;
  std::size_t next_event = 0;
  std::size_t next_comp = 0;
  std::size_t next_tilt = 0;
  TimestampMs device_ts = 0;
  try {
    for (const TimestampMs t : stops) {
      if (t > device_ts) {
        const std::string line = "SIM TICK " + std::to_string(t - device_ts);
        const auto replies = device.exchange(line);
        expect_ack(replies, line);
        for (std::size_t i = 0; i + 1 < replies.size(); ++i) session.ingestDeviceFrame(replies[i]);
        device_ts = t;
      }
      while (next_comp < script.compressions.size() && script.compressions[next_comp].start_ms == t) {
        const auto& c = script.compressions[next_comp++];
        const std::string line = "SIM PUSH " + fixed1(c.depth_cm) + " " + std::to_string(c.duration_ms);
        expect_ack(device.exchange(line), line);
      }
      while (next_tilt < script.tilt.size() && script.tilt[next_tilt].ts == t) {
        const std::string line = "SIM TILT " + fixed1(script.tilt[next_tilt++].degrees);
        expect_ack(device.exchange(line), line);
      }
      if (t % 1000 == 0) session.tickClock(t);
      while (next_event < script.events.size() && script.events[next_event].ts == t) {
        session.applyEvent(script.events[next_event++]);
      }
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DeviceUnreachable) throw;
    result.device_error = e.what();
    result.log = session.finish(true);
    return result;
  }
  result.log = session.finish(script.abort);
  return result;
}

}  // namespace bls
