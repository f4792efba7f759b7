#include "bls/session_log.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "bls/error.hpp"

namespace bls {

using nlohmann::json;

std::string fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

json header_json(const SessionHeader& h, const std::string& trace_ref) {
  return {{"record", "header"},
          {"schema", h.schema},
          {"session_id", h.meta.session_id},
          {"trainee", h.meta.trainee},
          {"started_at", h.meta.started_at},
          {"start_ts", h.meta.start_ts},
          {"device_attached", h.meta.device_attached},
          {"mode", to_string(h.mode)},
          {"config_hash", config_hash(h)},
          {"config", to_json(h.config)},
          {"scenario", to_json(h.scenario)},
          {"sensor_trace", trace_ref}};
}

json record_json(const JournalRecord& r) {
  return std::visit(
      [](const auto& x) -> json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, rec::Event>) {
          return {{"record", "event"}, {"frames_before", x.frames_before}, {"event", to_json(x.event)}};
        } else if constexpr (std::is_same_v<T, rec::Tick>) {
          return {{"record", "tick"}, {"now", x.now}, {"frames_before", x.frames_before}};
        } else if constexpr (std::is_same_v<T, rec::Feedback>) {
          return {{"record", "feedback"}, {"feedback", to_json(x.feedback)}};
        } else if constexpr (std::is_same_v<T, rec::Recalibrate>) {
          return {{"record", "recalibrate"}, {"ts", x.ts}, {"frames_before", x.frames_before}};
        } else {
          return {{"record", "finish"},
                  {"ts", x.ts},
                  {"aborted", x.aborted},
                  {"frames_before", x.frames_before}};
        }
      },
      r);
}

void feed_frames(Session& s, const std::vector<std::string>& trace, std::size_t& cursor, std::size_t upto) {
  if (upto > trace.size()) throw Error(ErrorCode::InvalidArgument, "journal refers past the sensor trace");
  while (cursor < upto) s.ingestDeviceFrame(trace[cursor++]);
}

}  // namespace

std::string config_hash(const SessionHeader& header) {
  const json j = {{"mode", to_string(header.mode)},
                  {"config", to_json(header.config)},
                  {"scenario", to_json(header.scenario)}};
  return fnv1a64(j.dump());
}

std::vector<std::string> log_lines(const SessionLog& log, const std::string& trace_ref) {
  std::vector<std::string> lines;
  lines.push_back(header_json(log.header, trace_ref).dump());
  std::string digest_input;
  for (const auto& r : log.journal) {
    lines.push_back(record_json(r).dump());
    digest_input += lines.back();
    digest_input += '\n';
  }
  for (const auto& frame : log.sensor_trace) digest_input += frame;
  for (const auto& o : log.outcomes) {
    json j = to_json(o);
    j["record"] = "outcome";
    lines.push_back(j.dump());
  }
  lines.push_back(json{{"record", "summary"},
                       {"cpr", to_json(log.cpr)},
                       {"total_duration_ms", log.total_duration_ms},
                       {"aborted", log.aborted},
                       {"journal_digest", fnv1a64(digest_input)}}
                      .dump());
  return lines;
}

void write_log(const SessionLog& log, const std::string& path) {
  const std::string trace_path = path + ".trace";
  const std::string trace_ref = std::filesystem::path(trace_path).filename().string();
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
    for (const auto& line : log_lines(log, trace_ref)) out << line << '\n';
  }
  std::ofstream trace(trace_path, std::ios::binary);
  if (!trace) throw Error(ErrorCode::Io, "cannot write " + trace_path);
  for (const auto& frame : log.sensor_trace) trace << frame;
}

std::vector<std::string> read_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open sensor trace " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(line + "\n");
  }
  return out;
}

SessionLog parse_log(const std::vector<std::string>& lines, std::vector<std::string> trace) {
  if (lines.empty()) throw Error(ErrorCode::SchemaMismatch, "empty log");
  SessionLog log;
  try {
    const json h = json::parse(lines[0]);
    if (h.value("record", "") != "header") throw Error(ErrorCode::SchemaMismatch, "first record is not a header");
    const int schema = h.value("schema", 0);
    if (schema != kSessionLogSchema) {
      throw Error(ErrorCode::SchemaMismatch, "log schema " + std::to_string(schema) + ", expected " +
                                                 std::to_string(kSessionLogSchema));
    }
    log.header.schema = schema;
    log.header.meta.session_id = h.at("session_id").get<std::string>();
    log.header.meta.trainee = h.at("trainee").get<std::string>();
    log.header.meta.started_at = h.at("started_at").get<std::string>();
    log.header.meta.start_ts = h.at("start_ts").get<TimestampMs>();
    log.header.meta.device_attached = h.at("device_attached").get<bool>();
    log.header.mode = training_mode_from_string(h.at("mode").get<std::string>());
    log.header.config = session_config_from_json(h.at("config"));
    log.header.scenario = scenario_from_json(h.at("scenario"));

    for (std::size_t i = 1; i < lines.size(); ++i) {
      const json j = json::parse(lines[i]);
      const auto kind = j.at("record").get<std::string>();
      if (kind == "event") {
        log.journal.push_back(rec::Event{session_event_from_json(j.at("event")),
                                         j.at("frames_before").get<std::size_t>()});
      } else if (kind == "tick") {
        log.journal.push_back(rec::Tick{j.at("now").get<TimestampMs>(), j.at("frames_before").get<std::size_t>()});
      } else if (kind == "feedback") {
        log.journal.push_back(rec::Feedback{feedback_event_from_json(j.at("feedback"))});
      } else if (kind == "recalibrate") {
        log.journal.push_back(
            rec::Recalibrate{j.at("ts").get<TimestampMs>(), j.at("frames_before").get<std::size_t>()});
      } else if (kind == "finish") {
        log.journal.push_back(rec::Finish{j.at("ts").get<TimestampMs>(), j.at("aborted").get<bool>(),
                                          j.at("frames_before").get<std::size_t>()});
      } else if (kind == "outcome") {
        log.outcomes.push_back(task_outcome_from_json(j));
      } else if (kind == "summary") {
        log.cpr = cpr_summary_from_json(j.at("cpr"));
        log.total_duration_ms = j.at("total_duration_ms").get<TimestampMs>();
        log.aborted = j.at("aborted").get<bool>();
      } else {
        throw Error(ErrorCode::SchemaMismatch, "unknown record '" + kind + "'");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("log: ") + e.what());
  }
  log.sensor_trace = std::move(trace);
  return log;
}

LoadedLog read_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open log " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty()) throw Error(ErrorCode::SchemaMismatch, "empty log " + path);

  std::string trace_ref;
  try {
    trace_ref = json::parse(lines[0]).value("sensor_trace", "");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("log header: ") + e.what());
  }
  std::vector<std::string> trace;
  if (!trace_ref.empty()) {
    const auto trace_path = std::filesystem::path(path).parent_path() / trace_ref;
    if (std::filesystem::exists(trace_path)) trace = read_trace(trace_path.string());
  }
  LoadedLog loaded{parse_log(lines, std::move(trace)), std::move(lines), trace_ref};
  return loaded;
}

SessionLog regenerate(const SessionLog& stored) {
  SessionMeta meta = stored.header.meta;
  Session s = Session::start(stored.header.scenario, stored.header.mode, stored.header.config, meta);
  std::size_t cursor = 0;
  for (const auto& r : stored.journal) {
    if (const auto* e = std::get_if<rec::Event>(&r)) {
      if (e->event.source == EventSource::Device) continue;
      feed_frames(s, stored.sensor_trace, cursor, e->frames_before);
      s.applyEvent(e->event);
    } else if (const auto* t = std::get_if<rec::Tick>(&r)) {
      feed_frames(s, stored.sensor_trace, cursor, t->frames_before);
      s.tickClock(t->now);
    } else if (const auto* c = std::get_if<rec::Recalibrate>(&r)) {
      feed_frames(s, stored.sensor_trace, cursor, c->frames_before);
      s.recalibrate(c->ts);
    } else if (const auto* f = std::get_if<rec::Finish>(&r)) {
      feed_frames(s, stored.sensor_trace, cursor, f->frames_before);
      return s.finish(f->aborted);
    }
  }
  throw Error(ErrorCode::InvalidArgument, "log has no finish record");
}

ReplayVerdict replay(const LoadedLog& loaded) {
  ReplayVerdict v;
  std::vector<std::string> regenerated;
  std::string failure;
  try {
    regenerated = log_lines(regenerate(loaded.log), loaded.trace_ref);
  } catch (const Error& e) {
    failure = e.what();
  }
  const auto& stored = loaded.raw_lines;
  const std::size_t n = std::max(stored.size(), regenerated.size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::string expected = i < stored.size() ? stored[i] : "<missing>";
    const std::string actual =
        i < regenerated.size() ? regenerated[i] : (failure.empty() ? "<missing>" : "<replay failed: " + failure + ">");
    if (expected != actual) {
      v.mismatch_line = i + 1;
      v.expected = expected;
      v.actual = actual;
      return v;
    }
  }
  v.identical = true;
  return v;
}

}  // namespace bls
