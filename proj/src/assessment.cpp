#include "bls/assessment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "bls/error.hpp"

namespace bls {

using nlohmann::json;

namespace {

bool in_band(double v, double lo, double hi) { return v >= lo && v <= hi; }

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

}  // namespace

double round_to_hundredths(double v) { return std::round(v * 100.0) / 100.0; }

int scoreTask(TaskId task, const TaskOutcome& outcome, const ScoreTable& table) {
  auto it = table.task_points.find(task);
  if (it == table.task_points.end()) {
    throw Error(ErrorCode::UnknownTask, std::string(to_string(task)) + " has no score entry");
  }
  if (task == TaskId::PlaceAedPads) {
    int pads = 0;
    for (const auto& id : outcome.subtasks_done) {
      if (id.rfind("pad-", 0) == 0) ++pads;
    }
    return std::min(it->second, pads * table.aed_pad_points);
  }
  return outcome.completed ? it->second : 0;
}

int scoreCpr(const CprSummary& summary, const ScoreTable& table) {
  if (summary.push_count == 0) return 0;
  int points = 0;
  if (summary.avg_rate_per_min) {
    for (const auto& band : table.cpr_rate_bands) {
      if (in_band(*summary.avg_rate_per_min, band.lower_per_min, band.upper_per_min)) {
        points += band.points;
        break;
      }
    }
  }
  if (summary.avg_depth_cm &&
      in_band(*summary.avg_depth_cm, table.cpr_depth_band.lower_cm, table.cpr_depth_band.upper_cm)) {
    points += table.cpr_depth_band.points;
  }
  return points;
}

namespace {

std::vector<TaskId> executed_sequence(std::span<const TaskOutcome> outcomes) {
  std::vector<const TaskOutcome*> done;
  for (const auto& o : outcomes) {
    if (o.completed && o.executed_position > 0) done.push_back(&o);
  }
  std::sort(done.begin(), done.end(),
            [](const TaskOutcome* a, const TaskOutcome* b) { return a->executed_position < b->executed_position; });
  std::vector<TaskId> seq;
  for (const auto* o : done) seq.push_back(o->task);
  return seq;
}

std::map<TaskId, bool> in_order_flags(std::span<const TaskOutcome> outcomes, const SequenceGraph& graph) {
  std::map<TaskId, bool> flags;
  const auto seq = executed_sequence(outcomes);
  for (std::size_t k = 0; k < seq.size(); ++k) {
    if (!graph.contains(seq[k])) continue;
    flags[seq[k]] = k == 0 ? seq[k] == graph.start : predecessors(graph, seq[k]).count(seq[k - 1]) > 0;
  }
  return flags;
}

}  // namespace

double orderFraction(std::span<const TaskOutcome> outcomes, const SequenceGraph& graph) {
  if (graph.tasks.empty()) return 0.0;
  int in_order = 0;
  for (const auto& [id, ok] : in_order_flags(outcomes, graph)) in_order += ok ? 1 : 0;
  return static_cast<double>(in_order) / static_cast<double>(graph.tasks.size());
}

double finalScore(double intermediate, double order_fraction) {
  return intermediate * (0.5 + 0.5 * order_fraction);
}

DebriefReport buildDebrief(const SessionLog& log, const SequenceGraph& graph, const ScoreTable& table,
                           std::span<const DebriefReport> history) {
  DebriefReport r;
  r.session_id = log.header.meta.session_id;
  r.trainee = log.header.meta.trainee;
  r.started_at = log.header.meta.started_at;
  r.mode = log.header.mode;
  r.cpr = log.cpr;
  r.rate_band = log.header.config.cpr.rate_ok_band;
  r.depth_band = log.header.config.cpr.depth_ok_band;
  r.total_duration_ms = log.total_duration_ms;
  r.max_score = maxAchievableScore(table);

  const auto flags = in_order_flags(log.outcomes, graph);
  for (const auto& o : log.outcomes) {
    TaskResult t;
    t.task = o.task;
    t.completed = o.completed;
    auto pts = table.task_points.find(o.task);
    t.points_max = pts == table.task_points.end() ? 0 : pts->second;
    if (o.task == TaskId::PerformCompressions) {
      t.points_earned = o.completed ? std::min(scoreCpr(log.cpr, table), t.points_max) : 0;
    } else {
      t.points_earned = pts == table.task_points.end() ? 0 : scoreTask(o.task, o, table);
    }
    if (o.completed && o.started_ts && o.finished_ts) t.duration_ms = *o.finished_ts - *o.started_ts;
    auto f = flags.find(o.task);
    t.in_order = f != flags.end() && f->second;
    t.subtask_completion = o.subtask_total > 0
                               ? static_cast<double>(o.subtasks_done.size()) / o.subtask_total
                               : (o.completed ? 1.0 : 0.0);
    r.intermediate_score += t.points_earned;
    r.task_results.push_back(t);
  }
  r.order_fraction = orderFraction(log.outcomes, graph);
  r.final_score = round_to_hundredths(finalScore(r.intermediate_score, r.order_fraction));

  // Hints: CPR quality first, then per task in sequence order.
  const auto& cpr = log.cpr;
  const double target = log.header.config.cpr.target_rate_per_min;
  if (cpr.push_count > 0) {
    if (cpr.avg_rate_per_min && *cpr.avg_rate_per_min < r.rate_band.first) {
      r.hints.push_back("increase compression rate toward " + fmt("%.0f", target) + "/min (average was " +
                        fmt("%.1f", *cpr.avg_rate_per_min) + "/min)");
    } else if (cpr.avg_rate_per_min && *cpr.avg_rate_per_min > r.rate_band.second) {
      r.hints.push_back("decrease compression rate toward " + fmt("%.0f", target) + "/min (average was " +
                        fmt("%.1f", *cpr.avg_rate_per_min) + "/min)");
    }
    if (cpr.avg_depth_cm && *cpr.avg_depth_cm < r.depth_band.first) {
      r.hints.push_back("push deeper: aim for " + fmt("%.0f", r.depth_band.first) + "-" +
                        fmt("%.0f", r.depth_band.second) + " cm (average was " + fmt("%.1f", *cpr.avg_depth_cm) +
                        " cm)");
    } else if (cpr.avg_depth_cm && *cpr.avg_depth_cm > r.depth_band.second) {
      r.hints.push_back("push less deeply: aim for " + fmt("%.0f", r.depth_band.first) + "-" +
                        fmt("%.0f", r.depth_band.second) + " cm (average was " + fmt("%.1f", *cpr.avg_depth_cm) +
                        " cm)");
    }
    if (!cpr.full_release_always) r.hints.push_back("release the chest fully after every compression");
  }
  std::map<TaskId, bool> over_budget;
  for (const auto& f : log.feedback()) {
    if (const auto* t = std::get_if<fb::TimeBudgetExceeded>(&f.kind)) over_budget[t->task] = true;
  }
  for (const auto& o : log.outcomes) {
    if (!o.completed) r.hints.push_back(std::string(to_string(o.task)) + " was not completed");
    if (over_budget.count(o.task)) {
      const auto* spec = graph.find(o.task);
      const double budget = spec && spec->time_budget_s ? *spec->time_budget_s : 0.0;
      r.hints.push_back(std::string(to_string(o.task)) + " took longer than its " + fmt("%.0f", budget) +
                        " s time budget");
    }
  }
  int out_of_order = 0;
  for (const auto& t : r.task_results) out_of_order += t.completed && !t.in_order ? 1 : 0;
  if (out_of_order > 0) {
    r.hints.push_back("follow the sequence: " + std::to_string(out_of_order) +
                      (out_of_order == 1 ? " step was" : " steps were") + " done out of order");
  }
  if (r.hints.empty()) r.hints.push_back("all steps completed correctly and in order - well done");

  std::optional<std::string> best_key;
  const std::string own_key = history_file_name(r);
  for (const auto& prev : history) {
    if (prev.session_id == r.session_id || prev.trainee != r.trainee) continue;
    const std::string key = history_file_name(prev);
    if (key >= own_key) continue;
    if (!best_key || key > *best_key) {
      best_key = key;
      r.previous_comparison = PreviousComparison{prev.final_score, prev.total_duration_ms, prev.session_id};
    }
  }
  return r;
}

json to_json(const DebriefReport& r) {
  json tasks = json::array();
  for (const auto& t : r.task_results) {
    tasks.push_back({{"task", to_string(t.task)},
                     {"points_earned", t.points_earned},
                     {"points_max", t.points_max},
                     {"completed", t.completed},
                     {"duration_ms", t.duration_ms},
                     {"in_order", t.in_order},
                     {"subtask_completion", round_to_hundredths(t.subtask_completion)}});
  }
  json cpr = to_json(r.cpr);
  cpr["rate_band"] = json::array({r.rate_band.first, r.rate_band.second});
  cpr["depth_band"] = json::array({r.depth_band.first, r.depth_band.second});
  json prev = nullptr;
  if (r.previous_comparison) {
    prev = {{"final_score", r.previous_comparison->final_score},
            {"total_duration_ms", r.previous_comparison->total_duration_ms},
            {"session_id", r.previous_comparison->session_id},
            {"score_delta", round_to_hundredths(r.final_score - r.previous_comparison->final_score)},
            {"duration_delta_ms", r.total_duration_ms - r.previous_comparison->total_duration_ms}};
  }
  return {{"schema", r.schema},
          {"kind", "debrief"},
          {"session_id", r.session_id},
          {"trainee", r.trainee},
          {"started_at", r.started_at},
          {"mode", to_string(r.mode)},
          {"task_results", tasks},
          {"intermediate_score", r.intermediate_score},
          {"max_score", r.max_score},
          {"order_fraction", round_to_hundredths(r.order_fraction)},
          {"final_score", round_to_hundredths(r.final_score)},
          {"total_duration_ms", r.total_duration_ms},
          {"cpr", cpr},
          {"hints", r.hints},
          {"previous_comparison", prev}};
}

DebriefReport debrief_from_json(const json& j) {
  try {
    if (j.value("schema", 0) != kReportSchema) throw Error(ErrorCode::SchemaMismatch, "report schema");
    DebriefReport r;
    r.session_id = j.at("session_id").get<std::string>();
    r.trainee = j.at("trainee").get<std::string>();
    r.started_at = j.at("started_at").get<std::string>();
    r.mode = training_mode_from_string(j.at("mode").get<std::string>());
    for (const auto& t : j.at("task_results")) {
      TaskResult x;
      x.task = task_id_from_string(t.at("task").get<std::string>());
      x.points_earned = t.at("points_earned").get<int>();
      x.points_max = t.at("points_max").get<int>();
      x.completed = t.at("completed").get<bool>();
      x.duration_ms = t.at("duration_ms").get<TimestampMs>();
      x.in_order = t.at("in_order").get<bool>();
      x.subtask_completion = t.at("subtask_completion").get<double>();
      r.task_results.push_back(x);
    }
    r.intermediate_score = j.at("intermediate_score").get<int>();
    r.max_score = j.at("max_score").get<int>();
    r.order_fraction = j.at("order_fraction").get<double>();
    r.final_score = j.at("final_score").get<double>();
    r.total_duration_ms = j.at("total_duration_ms").get<TimestampMs>();
    r.cpr = cpr_summary_from_json(j.at("cpr"));
    r.rate_band = {j["cpr"]["rate_band"].at(0).get<double>(), j["cpr"]["rate_band"].at(1).get<double>()};
    r.depth_band = {j["cpr"]["depth_band"].at(0).get<double>(), j["cpr"]["depth_band"].at(1).get<double>()};
    r.hints = j.at("hints").get<std::vector<std::string>>();
    if (!j.at("previous_comparison").is_null()) {
      const auto& p = j.at("previous_comparison");
      r.previous_comparison = PreviousComparison{p.at("final_score").get<double>(),
                                                 p.at("total_duration_ms").get<TimestampMs>(),
                                                 p.at("session_id").get<std::string>()};
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("report: ") + e.what());
  }
}

std::string render_text(const DebriefReport& r) {
  std::ostringstream out;
  auto secs = [](TimestampMs ms) { return fmt("%.1f s", static_cast<double>(ms) / 1000.0); };
  int completed = 0;
  for (const auto& t : r.task_results) completed += t.completed ? 1 : 0;
  const double pct = r.task_results.empty() ? 0.0 : 100.0 * completed / r.task_results.size();

  out << "Debrief " << r.session_id << " (" << r.trainee << ", " << to_string(r.mode) << " mode, "
      << r.started_at << ")\n";
  out << "Final score: " << fmt("%.2f", r.final_score) << " (intermediate " << r.intermediate_score << "/"
      << r.max_score << ", order " << fmt("%.0f%%", 100.0 * r.order_fraction) << ")\n";
  out << "Tasks completed: " << completed << "/" << r.task_results.size() << " (" << fmt("%.0f%%", pct)
      << "), total time " << secs(r.total_duration_ms) << "\n";
  if (r.previous_comparison) {
    const auto& p = *r.previous_comparison;
    out << "Previous training: score " << fmt("%.2f", p.final_score) << " ("
        << fmt("%+.2f", r.final_score - p.final_score) << "), time " << secs(p.total_duration_ms) << "\n";
  }
  out << "\n";
  for (const auto& t : r.task_results) {
    char line[160];
    std::snprintf(line, sizeof line, "  %-27s %-4s %d/%d pts  %3.0f%%  %8s%s\n", std::string(to_string(t.task)).c_str(),
                  t.completed ? "ok" : "--", t.points_earned, t.points_max, 100.0 * t.subtask_completion,
                  t.completed ? secs(t.duration_ms).c_str() : "-", t.completed && !t.in_order ? "  (out of order)" : "");
    out << line;
  }
  out << "\nCPR: ";
  if (r.cpr.push_count == 0) {
    out << "no compressions\n";
  } else {
    out << r.cpr.push_count << " compressions, rate "
        << (r.cpr.avg_rate_per_min ? fmt("%.1f/min", *r.cpr.avg_rate_per_min) : std::string("n/a")) << ", depth "
        << (r.cpr.avg_depth_cm ? fmt("%.1f cm", *r.cpr.avg_depth_cm) : std::string("n/a")) << ", full release "
        << (r.cpr.full_release_always ? "always" : "not always") << "\n";
  }
  out << "\nHints:\n";
  for (const auto& h : r.hints) out << "  - " << h << "\n";
  return out.str();
}

std::string history_file_name(const DebriefReport& r) {
  return r.trainee + "__" + r.started_at + "__" + r.session_id + ".json";
}

std::vector<DebriefReport> load_history(const std::string& dir, const std::string& trainee,
                                        const std::string& exclude_session_id) {
  namespace fs = std::filesystem;
  std::vector<std::pair<std::string, DebriefReport>> found;
  if (dir.empty() || !fs::is_directory(dir)) return {};
  const std::string prefix = trainee + "__";
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (!entry.is_regular_file() || name.rfind(prefix, 0) != 0 || entry.path().extension() != ".json") continue;
    std::ifstream in(entry.path());
    json j;
    try {
      in >> j;
    } catch (const json::exception&) {
      continue;
    }
    auto report = debrief_from_json(j);
    if (report.session_id == exclude_session_id) continue;
    found.emplace_back(name, std::move(report));
  }
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<DebriefReport> out;
  for (auto& [name, r] : found) out.push_back(std::move(r));
  return out;
}

void save_to_history(const DebriefReport& r, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const auto path = fs::path(dir) / history_file_name(r);
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << to_json(r).dump(2) << '\n';
}

}  // namespace bls
