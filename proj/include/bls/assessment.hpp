#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bls/session.hpp"

namespace bls {

inline constexpr int kReportSchema = 1;

struct TaskResult {
  TaskId task = TaskId::EnsureSafety;
  int points_earned = 0;
  int points_max = 0;
  bool completed = false;
  TimestampMs duration_ms = 0;
  bool in_order = false;
  double subtask_completion = 0.0;
};

struct PreviousComparison {
  double final_score = 0.0;
  TimestampMs total_duration_ms = 0;
  std::string session_id;
};

struct DebriefReport {
  int schema = kReportSchema;
  std::string session_id;
  std::string trainee;
  std::string started_at;
  TrainingMode mode = TrainingMode::Training;
  std::vector<TaskResult> task_results;
  int intermediate_score = 0;
  int max_score = 0;
  double order_fraction = 0.0;
  double final_score = 0.0;
  TimestampMs total_duration_ms = 0;
  CprSummary cpr;
  std::pair<double, double> rate_band{95.0, 125.0};
  std::pair<double, double> depth_band{5.0, 6.0};
  std::vector<std::string> hints;
  std::optional<PreviousComparison> previous_comparison;
};

// Points for a non-CPR task outcome. PlaceAedPads earns aed_pad_points per placed pad.
// Throws Error(UnknownTask) for tasks absent from the table.
int scoreTask(TaskId task, const TaskOutcome& outcome, const ScoreTable& table = defaultScoreTable());

// Rate band points plus depth band points. Bounds are inclusive and bands are tried in
// table order, so an exact boundary value earns the higher adjacent score.
int scoreCpr(const CprSummary& summary, const ScoreTable& table = defaultScoreTable());

// Executed sequence = completed tasks ordered by executed_position. A task is in order if
// the task executed right before it is one of its graph predecessors; the first executed
// task is in order only if it is the start node. Result is in-order count / task count.
double orderFraction(std::span<const TaskOutcome> outcomes, const SequenceGraph& graph);

double finalScore(double intermediate, double order_fraction);

DebriefReport buildDebrief(const SessionLog& log, const SequenceGraph& graph, const ScoreTable& table,
                           std::span<const DebriefReport> history = {});

double round_to_hundredths(double v);

nlohmann::json to_json(const DebriefReport& r);
DebriefReport debrief_from_json(const nlohmann::json& j);
std::string render_text(const DebriefReport& r);

// Trainee history: one structured report per file, named
// "<trainee>__<started_at>__<session_id>.json". The latest earlier file wins.
std::vector<DebriefReport> load_history(const std::string& dir, const std::string& trainee,
                                        const std::string& exclude_session_id = {});
std::string history_file_name(const DebriefReport& r);
void save_to_history(const DebriefReport& r, const std::string& dir);

}  // namespace bls
