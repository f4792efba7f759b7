#include "bls/service.hpp"

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <map>
#include <mutex>
#include <thread>

#include "bls/assessment.hpp"
#include "bls/device_link.hpp"
#include "bls/error.hpp"
#include "bls/session_log.hpp"

namespace bls {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

std::string utc_now_iso() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::SessionFinished:
    case ErrorCode::SessionIncomplete: return 409;
    case ErrorCode::DeviceUnreachable: return 502;
    case ErrorCode::Io: return 500;
    default: return 400;
  }
}

void reply_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  reply_json(res, {{"error", code}, {"message", message}}, status);
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("body: ") + e.what());
  }
}

std::string fixed1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

}  // namespace

struct LiveSession {
  std::mutex m;
  std::condition_variable cv;
  std::unique_ptr<DeviceChannel> device;
  std::optional<Session> engine;
  Scenario scenario;
  Clock::time_point origin = Clock::now();
  TimestampMs device_ts = 0;
  TimestampMs last_tick_s = 0;
  bool closed = false;
  std::optional<std::string> device_error;
  std::optional<SessionLog> sealed;
  std::optional<DebriefReport> report;
  std::atomic<bool> stop_pump{false};
  std::thread pump;

  TimestampMs elapsed() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - origin).count();
  }

  // Steps device and engine up to the wall clock. Caller holds `m`.
  void advance() {
    if (closed) return;
    const TimestampMs t = elapsed();
    try {
      if (t > device_ts) {
        const auto replies = device->exchange("SIM TICK " + std::to_string(t - device_ts));
        if (replies.empty() || replies.back().rfind("ACK ", 0) != 0) {
          throw Error(ErrorCode::DeviceUnreachable, "device refused SIM TICK");
        }
        for (std::size_t i = 0; i + 1 < replies.size(); ++i) engine->ingestDeviceFrame(replies[i]);
        device_ts = t;
      }
      if (t / 1000 > last_tick_s) {
        last_tick_s = t / 1000;
        engine->tickClock(last_tick_s * 1000);
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DeviceUnreachable) throw;
      device_error = e.what();
      sealed = engine->finish(true);
      closed = true;
    }
    cv.notify_all();
  }

  void actuate(const std::string& line) {
    advance();
    if (closed) throw Error(ErrorCode::SessionFinished, "session is closed");
    const auto replies = device->exchange(line);
    if (replies.empty() || replies.back().rfind("ACK ", 0) != 0) {
      throw Error(ErrorCode::OutOfRange, replies.empty() ? "no reply" : replies.back().substr(0, replies.back().size() - 1));
    }
  }
};

struct TrainerService::Impl {
  ServiceOptions options;
  httplib::Server server;
  std::mutex sessions_m;
  std::map<std::string, std::shared_ptr<LiveSession>> sessions;
  int counter = 0;
  std::atomic<bool> stopping{false};

  explicit Impl(ServiceOptions o) : options(std::move(o)) { routes(); }

  ~Impl() {
    std::lock_guard lock(sessions_m);
    for (auto& [id, s] : sessions) stop_pump(*s);
  }

  static void stop_pump(LiveSession& s) {
    s.stop_pump = true;
    if (s.pump.joinable()) s.pump.join();
  }

  std::shared_ptr<LiveSession> find(const std::string& id) {
    std::lock_guard lock(sessions_m);
    auto it = sessions.find(id);
    if (it == sessions.end()) throw Error(ErrorCode::InvalidArgument, "unknown session " + id);
    return it->second;
  }

  Scenario load_named(const std::string& name) {
    if (name == "default") return defaultScenario();
    if (options.scenarios_dir.empty() || name.find('/') != std::string::npos || name.find("..") != std::string::npos) {
      throw Error(ErrorCode::InvalidArgument, "unknown scenario " + name);
    }
    const auto path = std::filesystem::path(options.scenarios_dir) / (name + ".json");
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::InvalidArgument, "unknown scenario " + name);
    return load_scenario(path.string());
  }

  json list_scenarios() {
    json names = json::array({"default"});
    if (!options.scenarios_dir.empty() && std::filesystem::is_directory(options.scenarios_dir)) {
      std::vector<std::string> found;
      for (const auto& e : std::filesystem::directory_iterator(options.scenarios_dir)) {
        if (e.path().extension() == ".json" && e.path().stem() != "default") found.push_back(e.path().stem().string());
      }
      std::sort(found.begin(), found.end());
      for (const auto& n : found) names.push_back(n);
    }
    return {{"scenarios", names}};
  }

  json create(const json& body) {
    const auto mode = training_mode_from_string(body.value("mode", "learning"));
    auto live = std::make_shared<LiveSession>();
    live->scenario = load_named(body.value("scenario", "default"));

    if (options.device_addr) {
      const auto [host, port] = parse_address(*options.device_addr);
      live->device = std::make_unique<TcpDeviceChannel>(host, port);
    } else {
      DeviceConfig cfg = options.device;
      cfg.clock = DeviceClock::Stepped;
      live->device = std::make_unique<LocalDeviceChannel>(cfg);
    }

    SessionMeta meta;
    {
      std::lock_guard lock(sessions_m);
      char id[32];
      std::snprintf(id, sizeof id, "live-%06d", ++counter);
      meta.session_id = id;
    }
    meta.trainee = body.value("trainee", "anonymous");
    meta.started_at = utc_now_iso();
    live->engine.emplace(Session::start(live->scenario, mode, SessionConfig{}, meta, live->device.get()));
    live->origin = Clock::now();

    const TimestampMs interval = options.pump_interval_ms;
    LiveSession* raw = live.get();
    live->pump = std::thread([raw, interval] {
      while (!raw->stop_pump) {
        {
          std::lock_guard lock(raw->m);
          if (raw->closed) break;
          try {
            raw->advance();
          } catch (const Error&) {
            // Surfaced to the next request that touches the session.
          }
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(interval));
      }
    });

    json out = {{"session_id", meta.session_id}, {"mode", to_string(mode)}, {"trainee", meta.trainee}};
    {
      std::lock_guard lock(live->m);
      json fbs = json::array();
      for (const auto& f : live->engine->feedback()) fbs.push_back(to_json(f));
      out["feedback"] = fbs;
    }
    std::lock_guard lock(sessions_m);
    sessions[meta.session_id] = live;
    return out;
  }

  json post_event(LiveSession& s, const json& body) {
    std::lock_guard lock(s.m);
    s.advance();
    if (s.closed) throw Error(ErrorCode::SessionFinished, "session is closed");
    SessionEvent e;
    e.kind = event_kind_from_json(body);
    e.source = EventSource::Ui;
    e.ts = std::max(s.elapsed(), s.engine->now());
    json fbs = json::array();
    for (const auto& f : s.engine->applyEvent(e)) fbs.push_back(to_json(f));
    s.cv.notify_all();
    return {{"ts", e.ts}, {"feedback", fbs}};
  }

  json finish(LiveSession& s, const json& body) {
    std::unique_lock lock(s.m);
    if (s.report) return to_json(*s.report);
    s.advance();
    const bool abort = body.value("abort", false) || s.device_error.has_value();
    SessionLog log = s.sealed ? *s.sealed : s.engine->finish(abort);
    s.closed = true;
    s.cv.notify_all();
    const auto history = load_history(options.history_dir, log.header.meta.trainee, log.header.meta.session_id);
    s.report = buildDebrief(log, s.scenario.graph, s.scenario.table, history);
    if (!options.history_dir.empty()) save_to_history(*s.report, options.history_dir);
    if (!options.log_dir.empty()) {
      std::filesystem::create_directories(options.log_dir);
      write_log(log, (std::filesystem::path(options.log_dir) / (log.header.meta.session_id + ".jsonl")).string());
    }
    lock.unlock();
    stop_pump(s);
    return to_json(*s.report);
  }

  template <typename F>
  void guarded(httplib::Response& res, F&& f) {
    try {
      f();
    } catch (const Error& e) {
      const bool unknown = std::string(e.what()).find("unknown session") != std::string::npos;
      reply_error(res, unknown ? 404 : http_status(e.code()), std::string(to_string(e.code())), e.what());
    } catch (const std::exception& e) {
      reply_error(res, 500, "internal", e.what());
    }
  }

  void routes() {
    server.Get("/scenarios", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { reply_json(res, list_scenarios()); });
    });
    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply_json(res, create(parse_body(req)), 201); });
    });
    server.Post(R"(/sessions/([\w-]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto s = find(req.matches[1]);
        reply_json(res, post_event(*s, parse_body(req)));
      });
    });
    server.Post(R"(/sessions/([\w-]+)/compressions)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto s = find(req.matches[1]);
        const json body = parse_body(req);
        const double depth = body.value("depth_cm", 5.5);
        const TimestampMs duration = body.value("duration_ms", TimestampMs{250});
        std::lock_guard lock(s->m);
        s->actuate("SIM PUSH " + fixed1(depth) + " " + std::to_string(duration));
        reply_json(res, {{"ok", true}, {"ts", s->device_ts}});
      });
    });
    server.Post(R"(/sessions/([\w-]+)/tilt)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto s = find(req.matches[1]);
        const double degrees = parse_body(req).at("degrees").get<double>();
        std::lock_guard lock(s->m);
        s->actuate("SIM TILT " + fixed1(degrees));
        reply_json(res, {{"ok", true}, {"ts", s->device_ts}});
      });
    });
    server.Get(R"(/sessions/([\w-]+)/feedback)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto s = find(req.matches[1]);
        auto cursor = std::make_shared<std::size_t>(0);
        if (req.has_param("from")) *cursor = std::stoul(req.get_param_value("from"));
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider("text/event-stream", [this, s, cursor](std::size_t, httplib::DataSink& sink) {
          std::unique_lock lock(s->m);
          s->cv.wait_for(lock, std::chrono::milliseconds(200), [&] {
            return stopping || s->closed || s->engine->feedback().size() > *cursor;
          });
          const auto& all = s->engine->feedback();
          std::string chunk;
          for (; *cursor < all.size(); ++*cursor) {
            chunk += "id: " + std::to_string(*cursor) + "\nevent: feedback\ndata: " + to_json(all[*cursor]).dump() + "\n\n";
          }
          const bool done = s->closed || stopping;
          lock.unlock();
          if (!chunk.empty() && !sink.write(chunk.data(), chunk.size())) return false;
          if (done) {
            const std::string end = "event: end\ndata: {}\n\n";
            sink.write(end.data(), end.size());
            sink.done();
          }
          return true;
        });
      });
    });
    server.Post(R"(/sessions/([\w-]+)/finish)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto s = find(req.matches[1]);
        reply_json(res, finish(*s, parse_body(req)));
      });
    });
    server.Get(R"(/sessions/([\w-]+)/report)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto s = find(req.matches[1]);
        std::lock_guard lock(s->m);
        if (!s->report) throw Error(ErrorCode::SessionIncomplete, "session has not finished");
        if (req.get_param_value("format") == "text") {
          res.set_content(render_text(*s->report), "text/plain");
        } else {
          reply_json(res, to_json(*s->report));
        }
      });
    });
  }
};

TrainerService::TrainerService(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

TrainerService::~TrainerService() { stop(); }

int TrainerService::bind(int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port("127.0.0.1");
    if (bound <= 0) throw Error(ErrorCode::Io, "cannot bind a free port");
    return bound;
  }
  if (!impl_->server.bind_to_port("127.0.0.1", port)) {
    throw Error(ErrorCode::Io, "port " + std::to_string(port) + " busy");
  }
  return port;
}

void TrainerService::run() { impl_->server.listen_after_bind(); }

void TrainerService::stop() {
  if (!impl_) return;
  impl_->stopping = true;
  {
    std::lock_guard lock(impl_->sessions_m);
    for (auto& [id, s] : impl_->sessions) s->cv.notify_all();
  }
  impl_->server.stop();
}

}  // namespace bls
