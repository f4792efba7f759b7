#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bls/events.hpp"
#include "bls/task_id.hpp"

namespace bls {

// Recognized subtask parameters (all optional, stored as text):
//   keyphrase      Keyphrase id, matched case-insensitively
//   zone           PositionTriggerEntered zone id
//   number         PhoneDialed number
//   side           AedPadPlaced side
//   min_angle_deg  HeadTiltReached lower bound
//   min_hold_ms    HeadAboveMouth lower bound
//   count          number of matching events needed (default 1)
struct SubTaskSpec {
  std::string id;
  EventType required_event = EventType::GlassDisposed;
  std::map<std::string, std::string> params;

  int required_count() const;
  bool matches(const EventKind& event) const;
};

struct InstructionPayload {
  std::string text;
  std::optional<std::string> image_ref;
  std::optional<std::string> audio_ref;
  std::optional<std::string> animation_ref;
  std::vector<std::string> keyphrase_hints;
};

struct TaskSpec {
  TaskId id = TaskId::EnsureSafety;
  std::vector<SubTaskSpec> subtasks;
  int max_points = 0;
  std::optional<double> time_budget_s;
  InstructionPayload instruction;
};

struct SequenceGraph {
  std::vector<TaskSpec> tasks;
  // (from, to): `from` is a predecessor of `to`.
  std::vector<std::pair<TaskId, TaskId>> edges;
  TaskId start = TaskId::EnsureSafety;
  TaskId end = TaskId::TriggerShock;

  const TaskSpec* find(TaskId id) const;
  bool contains(TaskId id) const { return find(id) != nullptr; }
};

struct RateBand {
  double lower_per_min = 0.0;
  double upper_per_min = 0.0;
  int points = 0;
};

struct DepthBand {
  double lower_cm = 0.0;
  double upper_cm = 0.0;
  int points = 0;
};

struct ScoreTable {
  std::map<TaskId, int> task_points;
  int aed_pad_points = 1;
  // Checked in order; bounds are inclusive, so list higher-scoring bands first.
  std::vector<RateBand> cpr_rate_bands;
  DepthBand cpr_depth_band;
};

SequenceGraph buildDefaultSequence();
ScoreTable defaultScoreTable();

// Throws Error(UnknownTask) when `task` is not part of the graph.
std::set<TaskId> predecessors(const SequenceGraph& graph, TaskId task);
std::set<TaskId> successors(const SequenceGraph& graph, TaskId task);

int maxAchievableScore(const ScoreTable& table);

enum class ViolationKind {
  Cycle,
  Unreachable,
  MissingStart,
  MissingEnd,
  StartHasPredecessors,
  EndHasSuccessors,
  EmptySubtasks,
  EmptyInstruction,
  NegativePoints,
  DuplicateTask,
  DanglingEdge,
};

struct Violation {
  ViolationKind kind;
  std::string detail;
};

std::string_view to_string(ViolationKind kind);

// Empty result means the graph is valid.
std::vector<Violation> validateSequence(const SequenceGraph& graph);

// Kahn's algorithm; ties broken by declaration order in graph.tasks.
// Throws Error(InvalidGraph) on a cycle.
std::vector<TaskId> topologicalOrder(const SequenceGraph& graph);

// Scenario documents: one JSON object holding the graph and its score table.
struct Scenario {
  std::string name;
  SequenceGraph graph;
  ScoreTable table;
};

Scenario defaultScenario();
nlohmann::json to_json(const Scenario& scenario);
Scenario scenario_from_json(const nlohmann::json& j);
Scenario load_scenario(const std::string& path);

}  // namespace bls
