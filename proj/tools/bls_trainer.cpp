// bls_trainer: manikin simulator, scripted sessions, replay, debrief and the live service.

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "bls/assessment.hpp"
#include "bls/cpr.hpp"
#include "bls/device_link.hpp"
#include "bls/error.hpp"
#include "bls/script.hpp"
#include "bls/service.hpp"
#include "bls/session_log.hpp"
#include "bls/wire.hpp"

namespace {

enum Exit { kOk = 0, kValidation = 2, kIo = 3, kMismatch = 4 };

std::atomic<bool> g_stop{false};
bls::TrainerService* g_service = nullptr;

void on_signal(int) {
  g_stop = true;
  if (g_service) g_service->stop();
}

int exit_code(const bls::Error& e) {
  switch (e.code()) {
    case bls::ErrorCode::Io:
    case bls::ErrorCode::DeviceUnreachable: return kIo;
    default: return kValidation;
  }
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw bls::Error(bls::ErrorCode::Io, "cannot write " + path);
  out << text;
}

bls::TrainingMode parse_mode(const std::string& mode) { return bls::training_mode_from_string(mode); }

int cmd_simulate(const std::string& config_path, int port, std::optional<std::uint64_t> seed) {
  bls::DeviceConfig cfg = config_path.empty() ? bls::DeviceConfig{} : bls::load_device_config(config_path);
  if (seed) cfg.seed = *seed;
  cfg.validate();
  bls::DeviceServer server(cfg, port);
  std::cout << bls::to_json(cfg).dump(2) << "\n";
  std::cout << "listening on 127.0.0.1:" << server.port() << std::endl;
  server.run(g_stop);
  return kOk;
}

int cmd_run(const std::string& script_path, const std::string& mode, const std::string& device,
            const std::string& config_path, const std::string& out, std::optional<std::uint64_t> seed) {
  bls::ScenarioScript script = bls::load_script(script_path);
  if (!config_path.empty()) {
    script.device = bls::load_device_config(config_path);
    script.validate();
  }
  bls::RunOptions options;
  options.mode = parse_mode(mode);
  options.seed = seed;

  std::unique_ptr<bls::TcpDeviceChannel> remote;
  if (!device.empty()) {
    const auto [host, port] = bls::parse_address(device);
    remote = std::make_unique<bls::TcpDeviceChannel>(host, port);
  }
  const bls::RunResult result = bls::runScript(script, options, remote.get());
  bls::write_log(result.log, out);

  int completed = 0;
  for (const auto& o : result.log.outcomes) completed += o.completed ? 1 : 0;
  std::cout << "session " << result.log.header.meta.session_id << ": " << completed << "/"
            << result.log.outcomes.size() << " tasks completed, " << result.log.cpr.push_count
            << " compressions, log " << out << "\n";
  if (result.device_error) {
    std::cerr << "device lost, session aborted: " << *result.device_error << "\n";
    return kIo;
  }
  return kOk;
}

int cmd_replay(const std::string& log_path) {
  const bls::LoadedLog loaded = bls::read_log(log_path);
  const bls::ReplayVerdict v = bls::replay(loaded);
  if (v.identical) {
    std::cout << "identical\n";
    return kOk;
  }
  std::cout << "mismatch at line " << v.mismatch_line << "\n";
  std::cout << "  stored:      " << v.expected << "\n";
  std::cout << "  regenerated: " << v.actual << "\n";
  return kMismatch;
}

int cmd_report(const std::string& log_path, const std::string& history, const std::string& format,
               const std::string& out) {
  if (format != "structured" && format != "text") {
    throw bls::Error(bls::ErrorCode::InvalidArgument, "format must be structured or text");
  }
  const bls::LoadedLog loaded = bls::read_log(log_path);
  const auto& log = loaded.log;
  const auto past = bls::load_history(history, log.header.meta.trainee, log.header.meta.session_id);
  const bls::DebriefReport report =
      bls::buildDebrief(log, log.header.scenario.graph, log.header.scenario.table, past);
  if (!history.empty()) bls::save_to_history(report, history);
  write_text(out, format == "text" ? bls::render_text(report) : bls::to_json(report).dump(2) + "\n");
  return kOk;
}

int cmd_serve(int port, const std::string& device, const std::string& scenarios, const std::string& history,
              const std::string& log_dir, const std::string& config_path) {
  bls::ServiceOptions options;
  options.scenarios_dir = scenarios;
  options.history_dir = history;
  options.log_dir = log_dir;
  if (!device.empty()) options.device_addr = device;
  if (!config_path.empty()) options.device = bls::load_device_config(config_path);
  bls::TrainerService service(options);
  const int bound = service.bind(port);
  std::cout << "serving on http://127.0.0.1:" << bound << std::endl;
  g_service = &service;
  service.run();
  g_service = nullptr;
  return kOk;
}

int cmd_analyze(const std::string& trace_path, const std::string& config_path) {
  bls::CprConfig cfg;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw bls::Error(bls::ErrorCode::Io, "cannot open " + config_path);
    cfg = bls::cpr_config_from_json(nlohmann::json::parse(in));
  }
  std::vector<bls::SensorSample> distance;
  std::vector<bls::SensorSample> gyro;
  for (const auto& line : bls::read_trace(trace_path)) {
    const auto frame = bls::wire::parse(line);
    const auto* smp = std::get_if<bls::wire::Sample>(&frame);
    if (!smp) continue;
    (smp->sensor == bls::SensorKind::Distance ? distance : gyro).push_back(bls::wire::to_sensor_sample(*smp));
  }
  // Same rule as the live session: buffer until a sample lands 1 s after the first.
  std::size_t n = 0;
  while (n < distance.size() &&
         (n < static_cast<std::size_t>(cfg.min_calibration_samples) || distance[n].ts - distance[0].ts < 1000)) {
    ++n;
  }
  bls::PushTracker tracker(cfg);
  tracker.calibrate(bls::calibrateZeroLevel(std::span(distance.data(), n), cfg.min_calibration_samples,
                                            cfg.min_calibration_span_ms));
  for (std::size_t i = n; i < distance.size(); ++i) tracker.ingest(distance[i]);
  nlohmann::json out = bls::to_json(bls::summarize(tracker.events()));
  out["zero_level_cm"] = tracker.zero_level()->baseline_cm;
  if (!gyro.empty()) {
    try {
      out["head_tilt_deg"] = bls::headTiltAngle(gyro);
    } catch (const bls::Error&) {
      out["head_tilt_deg"] = nullptr;
    }
  }
  std::cout << out.dump(2) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BLS training engine: manikin simulator, scripted sessions, replay and debriefing"};
  app.require_subcommand(1);

  std::string config, device, mode = "training", out, history, format = "structured", scenarios, log_dir;
  std::string script, log, trace;
  int port = 0;
  std::optional<std::uint64_t> seed;

  auto* simulate = app.add_subcommand("simulate", "run the manikin simulator on a TCP port");
  simulate->add_option("--config", config, "device config file");
  simulate->add_option("--port", port, "TCP port (0 picks a free one)")->default_val(7000);
  simulate->add_option("--seed", seed, "noise seed");

  auto* run = app.add_subcommand("run", "drive a session from a scenario script");
  run->add_option("script", script, "scenario script")->required();
  run->add_option("--mode", mode, "learning or training")->check(CLI::IsMember({"learning", "training"}));
  run->add_option("--device", device, "host:port of a stepped-clock device");
  run->add_option("--config", config, "device config file, replaces the script's");
  run->add_option("--out", out, "session log path")->required();
  run->add_option("--seed", seed, "device noise seed");

  auto* replay = app.add_subcommand("replay", "re-run a session log and compare byte for byte");
  replay->add_option("log", log, "session log")->required();

  auto* report = app.add_subcommand("report", "build the debrief for a session log");
  report->add_option("log", log, "session log")->required();
  report->add_option("--history", history, "trainee history directory");
  report->add_option("--format", format, "structured or text")->check(CLI::IsMember({"structured", "text"}));
  report->add_option("--out", out, "output file (stdout when omitted)");

  auto* serve = app.add_subcommand("serve", "serve live sessions over HTTP");
  serve->add_option("--port", port, "HTTP port (0 picks a free one)")->default_val(8080);
  serve->add_option("--device", device, "host:port of a stepped-clock device");
  serve->add_option("--config", config, "in-process device config file");
  serve->add_option("--scenarios", scenarios, "directory with extra scenario files");
  serve->add_option("--history", history, "trainee history directory");
  serve->add_option("--logs", log_dir, "directory for sealed session logs");

  auto* analyze = app.add_subcommand("analyze", "CPR summary of a recorded sensor trace");
  analyze->add_option("trace", trace, "sensor trace file")->required();
  analyze->add_option("--config", config, "CPR config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  try {
    if (*simulate) return cmd_simulate(config, port, seed);
    if (*run) return cmd_run(script, mode, device, config, out, seed);
    if (*replay) return cmd_replay(log);
    if (*report) return cmd_report(log, history, format, out);
    if (*serve) return cmd_serve(port, device, scenarios, history, log_dir, config);
    if (*analyze) return cmd_analyze(trace, config);
  } catch (const bls::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kOk;
}
