#include "bls/sequence.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <fstream>
#include <functional>
#include <sstream>

#include "bls/error.hpp"

namespace bls {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::UnknownTask: return "unknown-task";
    case ErrorCode::InvalidGraph: return "invalid-graph";
    case ErrorCode::TooFewSamples: return "too-few-samples";
    case ErrorCode::WrongSensor: return "wrong-sensor";
    case ErrorCode::NoGyroSamples: return "no-gyro-samples";
    case ErrorCode::Uncalibrated: return "uncalibrated";
    case ErrorCode::TimestampRegression: return "timestamp-regression";
    case ErrorCode::NonIncreasingTimestamps: return "non-increasing-timestamps";
    case ErrorCode::OutOfRange: return "out-of-range";
    case ErrorCode::MalformedFrame: return "malformed-frame";
    case ErrorCode::DeviceUnreachable: return "device-unreachable";
    case ErrorCode::SessionFinished: return "session-finished";
    case ErrorCode::SessionIncomplete: return "session-incomplete";
    case ErrorCode::SchemaMismatch: return "schema-mismatch";
    case ErrorCode::ScriptViolation: return "script-violation";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

std::string_view to_string(TaskId id) {
  switch (id) {
    case TaskId::EnsureSafety: return "EnsureSafety";
    case TaskId::CheckResponse: return "CheckResponse";
    case TaskId::OpenAirways: return "OpenAirways";
    case TaskId::CheckBreathing: return "CheckBreathing";
    case TaskId::CommunicateBreathingStatus: return "CommunicateBreathingStatus";
    case TaskId::CallAmbulance: return "CallAmbulance";
    case TaskId::SendForAed: return "SendForAed";
    case TaskId::PerformCompressions: return "PerformCompressions";
    case TaskId::Ventilate: return "Ventilate";
    case TaskId::PlaceAedPads: return "PlaceAedPads";
    case TaskId::MakePeopleStandBack: return "MakePeopleStandBack";
    case TaskId::TriggerShock: return "TriggerShock";
  }
  return "?";
}

TaskId task_id_from_string(std::string_view name) {
  for (TaskId id : kAllTasks) {
    if (to_string(id) == name) return id;
  }
  throw Error(ErrorCode::UnknownTask, std::string(name));
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::optional<std::string> param(const SubTaskSpec& spec, const std::string& key) {
  auto it = spec.params.find(key);
  if (it == spec.params.end()) return std::nullopt;
  return it->second;
}

SubTaskSpec subtask(std::string id, EventType type, std::map<std::string, std::string> params = {}) {
  return SubTaskSpec{std::move(id), type, std::move(params)};
}

TaskSpec task(TaskId id, int points, std::vector<SubTaskSpec> subtasks, std::string text,
              std::vector<std::string> hints = {}) {
  TaskSpec t;
  t.id = id;
  t.max_points = points;
  t.subtasks = std::move(subtasks);
  const std::string key(to_string(id));
  t.instruction.text = std::move(text);
  t.instruction.image_ref = "img/" + key;
  t.instruction.audio_ref = "audio/" + key;
  t.instruction.animation_ref = "anim/" + key;
  t.instruction.keyphrase_hints = std::move(hints);
  return t;
}

}  // namespace

int SubTaskSpec::required_count() const {
  auto c = param(*this, "count");
  if (!c) return 1;
  return std::max(1, std::stoi(*c));
}

bool SubTaskSpec::matches(const EventKind& event) const {
  if (type_of(event) != required_event) return false;
  return std::visit(
      [this](const auto& e) -> bool {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, ev::Keyphrase>) {
          auto want = param(*this, "keyphrase");
          return !want || lower(*want) == lower(e.id);
        } else if constexpr (std::is_same_v<T, ev::PositionTriggerEntered>) {
          auto want = param(*this, "zone");
          return !want || *want == e.zone;
        } else if constexpr (std::is_same_v<T, ev::PhoneDialed>) {
          auto want = param(*this, "number");
          return !want || *want == e.number;
        } else if constexpr (std::is_same_v<T, ev::AedPadPlaced>) {
          auto want = param(*this, "side");
          return !want || *want == e.side;
        } else if constexpr (std::is_same_v<T, ev::HeadTiltReached>) {
          auto want = param(*this, "min_angle_deg");
          return !want || e.degrees >= std::stod(*want);
        } else if constexpr (std::is_same_v<T, ev::HeadAboveMouth>) {
          auto want = param(*this, "min_hold_ms");
          return !want || e.hold_ms >= std::stoll(*want);
        } else {
          return true;
        }
      },
      event);
}

const TaskSpec* SequenceGraph::find(TaskId id) const {
  for (const auto& t : tasks) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

SequenceGraph buildDefaultSequence() {
  using E = EventType;
  SequenceGraph g;
  g.tasks = {
      task(TaskId::EnsureSafety, 2, {subtask("dispose-glass", E::GlassDisposed)},
           "Make sure the scene is safe. Remove the broken glass from the victim and drop it in "
           "the bin."),
      task(TaskId::CheckResponse, 1,
           {subtask("ask-response", E::Keyphrase, {{"keyphrase", "are-you-okay"}}),
            subtask("shake-shoulders", E::HandsOnShoulders)},
           "Check whether the victim responds: ask loudly if they are okay and gently shake their "
           "shoulders.",
           {"are-you-okay"}),
      task(TaskId::OpenAirways, 1,
           {subtask("hands-on-head", E::PositionTriggerEntered, {{"zone", "head"}}),
            subtask("tilt-head", E::HeadTiltReached, {{"min_angle_deg", "20"}})},
           "Open the airway: place one hand on the forehead and tilt the head back while lifting "
           "the chin."),
      task(TaskId::CheckBreathing, 0,
           {subtask("look-listen-feel", E::HeadAboveMouth, {{"min_hold_ms", "3000"}})},
           "Check for normal breathing: keep your head above the mouth, look towards the chest, "
           "and listen for no more than 10 seconds."),
      task(TaskId::CommunicateBreathingStatus, 0,
           {subtask("announce-status", E::Keyphrase, {{"keyphrase", "not-breathing"}})},
           "Tell the bystanders that the victim is not breathing normally.", {"not-breathing"}),
      task(TaskId::CallAmbulance, 2,
           {subtask("dial-emergency", E::PhoneDialed, {{"number", "112"}})},
           "Call the emergency number 112 using the phone."),
      task(TaskId::SendForAed, 2,
           {subtask("request-aed", E::Keyphrase, {{"keyphrase", "get-aed"}})},
           "Send a bystander to fetch an AED.", {"get-aed"}),
      task(TaskId::PerformCompressions, 4,
           {subtask("compressions-30", E::CompressionPush, {{"count", "30"}})},
           "Give 30 chest compressions in the centre of the chest, 5 to 6 cm deep, at 100 to 120 "
           "per minute. Let the chest rise fully after each push."),
      task(TaskId::Ventilate, 2,
           {subtask("rescue-breaths", E::VentilationDelivered, {{"count", "2"}})},
           "Give 2 rescue breaths with your head above the victim's head."),
      task(TaskId::PlaceAedPads, 2,
           {subtask("pad-right", E::AedPadPlaced, {{"side", "right"}}),
            subtask("pad-left", E::AedPadPlaced, {{"side", "left"}})},
           "Attach the AED pads: one below the right collarbone, one on the left side of the "
           "chest."),
      task(TaskId::MakePeopleStandBack, 1,
           {subtask("announce-stand-back", E::Keyphrase, {{"keyphrase", "stand-back"}})},
           "Make sure nobody touches the victim while the AED analyses the rhythm.",
           {"stand-back"}),
      task(TaskId::TriggerShock, 1, {subtask("press-shock", E::AedShockPressed)},
           "Press the flashing shock button."),
  };
  g.tasks[3].time_budget_s = 10.0;
  for (std::size_t i = 0; i + 1 < kAllTasks.size(); ++i) {
    g.edges.emplace_back(kAllTasks[i], kAllTasks[i + 1]);
  }
  g.start = TaskId::EnsureSafety;
  g.end = TaskId::TriggerShock;
  return g;
}

ScoreTable defaultScoreTable() {
  ScoreTable t;
  t.task_points = {
      {TaskId::EnsureSafety, 2},       {TaskId::CheckResponse, 1},
      {TaskId::OpenAirways, 1},        {TaskId::CheckBreathing, 0},
      {TaskId::CommunicateBreathingStatus, 0}, {TaskId::CallAmbulance, 2},
      {TaskId::SendForAed, 2},         {TaskId::PerformCompressions, 4},
      {TaskId::Ventilate, 2},          {TaskId::PlaceAedPads, 2},
      {TaskId::MakePeopleStandBack, 1}, {TaskId::TriggerShock, 1},
  };
  t.aed_pad_points = 1;
  t.cpr_rate_bands = {{95.0, 125.0, 2}, {80.0, 95.0, 1}, {125.0, 140.0, 1}};
  t.cpr_depth_band = {5.0, 6.0, 2};
  return t;
}

std::set<TaskId> predecessors(const SequenceGraph& graph, TaskId task) {
  if (!graph.contains(task)) throw Error(ErrorCode::UnknownTask, std::string(to_string(task)));
  std::set<TaskId> out;
  for (const auto& [from, to] : graph.edges) {
    if (to == task) out.insert(from);
  }
  return out;
}

std::set<TaskId> successors(const SequenceGraph& graph, TaskId task) {
  if (!graph.contains(task)) throw Error(ErrorCode::UnknownTask, std::string(to_string(task)));
  std::set<TaskId> out;
  for (const auto& [from, to] : graph.edges) {
    if (from == task) out.insert(to);
  }
  return out;
}

int maxAchievableScore(const ScoreTable& table) {
  int sum = 0;
  for (const auto& [id, points] : table.task_points) sum += points;
  return sum;
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::Cycle: return "cycle";
    case ViolationKind::Unreachable: return "unreachable";
    case ViolationKind::MissingStart: return "missing-start";
    case ViolationKind::MissingEnd: return "missing-end";
    case ViolationKind::StartHasPredecessors: return "start-has-predecessors";
    case ViolationKind::EndHasSuccessors: return "end-has-successors";
    case ViolationKind::EmptySubtasks: return "empty-subtasks";
    case ViolationKind::EmptyInstruction: return "empty-instruction";
    case ViolationKind::NegativePoints: return "negative-points";
    case ViolationKind::DuplicateTask: return "duplicate-task";
    case ViolationKind::DanglingEdge: return "dangling-edge";
  }
  return "?";
}

std::vector<Violation> validateSequence(const SequenceGraph& graph) {
  std::vector<Violation> out;
  auto add = [&out](ViolationKind k, std::string detail) { out.push_back({k, std::move(detail)}); };

  std::set<TaskId> seen;
  for (const auto& t : graph.tasks) {
    const std::string name(to_string(t.id));
    if (!seen.insert(t.id).second) add(ViolationKind::DuplicateTask, name);
    if (t.subtasks.empty()) add(ViolationKind::EmptySubtasks, name);
    if (t.instruction.text.empty()) add(ViolationKind::EmptyInstruction, name);
    if (t.max_points < 0) add(ViolationKind::NegativePoints, name);
  }
  for (const auto& [from, to] : graph.edges) {
    if (!seen.count(from) || !seen.count(to)) {
      add(ViolationKind::DanglingEdge,
          std::string(to_string(from)) + "->" + std::string(to_string(to)));
    }
  }

  const bool has_start = seen.count(graph.start) > 0;
  const bool has_end = seen.count(graph.end) > 0;
  if (!has_start) add(ViolationKind::MissingStart, std::string(to_string(graph.start)));
  if (!has_end) add(ViolationKind::MissingEnd, std::string(to_string(graph.end)));

  std::map<TaskId, std::vector<TaskId>> adj;
  for (const auto& [from, to] : graph.edges) {
    if (seen.count(from) && seen.count(to)) adj[from].push_back(to);
  }
  if (has_start && !predecessors(graph, graph.start).empty()) {
    add(ViolationKind::StartHasPredecessors, std::string(to_string(graph.start)));
  }
  if (has_end && !successors(graph, graph.end).empty()) {
    add(ViolationKind::EndHasSuccessors, std::string(to_string(graph.end)));
  }

  // Cycle detection by three-colour DFS over every node.
  enum class Colour { White, Grey, Black };
  std::map<TaskId, Colour> colour;
  for (TaskId id : seen) colour[id] = Colour::White;
  bool cyclic = false;
  std::function<void(TaskId)> dfs = [&](TaskId u) {
    colour[u] = Colour::Grey;
    for (TaskId v : adj[u]) {
      if (colour[v] == Colour::Grey) {
        if (!cyclic) {
          add(ViolationKind::Cycle,
              std::string(to_string(u)) + "->" + std::string(to_string(v)));
        }
        cyclic = true;
      } else if (colour[v] == Colour::White) {
        dfs(v);
      }
    }
    colour[u] = Colour::Black;
  };
  for (TaskId id : seen) {
    if (colour[id] == Colour::White) dfs(id);
  }

  if (has_start) {
    std::set<TaskId> reached{graph.start};
    std::deque<TaskId> queue{graph.start};
    while (!queue.empty()) {
      TaskId u = queue.front();
      queue.pop_front();
      for (TaskId v : adj[u]) {
        if (reached.insert(v).second) queue.push_back(v);
      }
    }
    for (const auto& t : graph.tasks) {
      if (!reached.count(t.id)) add(ViolationKind::Unreachable, std::string(to_string(t.id)));
    }
  }
  return out;
}

std::vector<TaskId> topologicalOrder(const SequenceGraph& graph) {
  std::map<TaskId, int> indegree;
  for (const auto& t : graph.tasks) indegree[t.id] = 0;
  for (const auto& [from, to] : graph.edges) {
    if (indegree.count(from) && indegree.count(to)) ++indegree[to];
  }
  std::vector<TaskId> order;
  std::vector<bool> placed(graph.tasks.size(), false);
  while (order.size() < graph.tasks.size()) {
    bool progressed = false;
    for (std::size_t i = 0; i < graph.tasks.size(); ++i) {
      const TaskId id = graph.tasks[i].id;
      if (placed[i] || indegree[id] != 0) continue;
      placed[i] = true;
      order.push_back(id);
      for (const auto& [from, to] : graph.edges) {
        if (from == id && indegree.count(to)) --indegree[to];
      }
      progressed = true;
      break;
    }
    if (!progressed) throw Error(ErrorCode::InvalidGraph, "graph contains a cycle");
  }
  return order;
}

Scenario defaultScenario() { return Scenario{"default-bls", buildDefaultSequence(), defaultScoreTable()}; }

namespace {

nlohmann::json opt_json(const std::optional<std::string>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<std::string> opt_string(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

}  // namespace

nlohmann::json to_json(const Scenario& scenario) {
  using nlohmann::json;
  json tasks = json::array();
  for (const auto& t : scenario.graph.tasks) {
    json subs = json::array();
    for (const auto& s : t.subtasks) {
      subs.push_back({{"id", s.id}, {"event", to_string(s.required_event)}, {"params", s.params}});
    }
    tasks.push_back({
        {"id", to_string(t.id)},
        {"max_points", t.max_points},
        {"time_budget_s", t.time_budget_s ? json(*t.time_budget_s) : json(nullptr)},
        {"subtasks", subs},
        {"instruction",
         {{"text", t.instruction.text},
          {"image", opt_json(t.instruction.image_ref)},
          {"audio", opt_json(t.instruction.audio_ref)},
          {"animation", opt_json(t.instruction.animation_ref)},
          {"keyphrase_hints", t.instruction.keyphrase_hints}}},
    });
  }
  json edges = json::array();
  for (const auto& [from, to] : scenario.graph.edges) {
    edges.push_back(json::array({to_string(from), to_string(to)}));
  }
  json points = json::object();
  for (const auto& [id, p] : scenario.table.task_points) points[std::string(to_string(id))] = p;
  json rate_bands = json::array();
  for (const auto& b : scenario.table.cpr_rate_bands) {
    rate_bands.push_back({{"lower", b.lower_per_min}, {"upper", b.upper_per_min}, {"points", b.points}});
  }
  const auto& d = scenario.table.cpr_depth_band;
  return {
      {"schema", 1},
      {"name", scenario.name},
      {"start", to_string(scenario.graph.start)},
      {"end", to_string(scenario.graph.end)},
      {"tasks", tasks},
      {"edges", edges},
      {"scores",
       {{"tasks", points},
        {"aed_pad_points", scenario.table.aed_pad_points},
        {"cpr_rate_bands", rate_bands},
        {"cpr_depth_band", {{"lower", d.lower_cm}, {"upper", d.upper_cm}, {"points", d.points}}}}},
  };
}

Scenario scenario_from_json(const nlohmann::json& j) {
  try {
    if (j.value("schema", 0) != 1) throw Error(ErrorCode::SchemaMismatch, "scenario schema must be 1");
    Scenario s;
    s.name = j.value("name", "unnamed");
    s.graph.start = task_id_from_string(j.at("start").get<std::string>());
    s.graph.end = task_id_from_string(j.at("end").get<std::string>());
    for (const auto& jt : j.at("tasks")) {
      TaskSpec t;
      t.id = task_id_from_string(jt.at("id").get<std::string>());
      t.max_points = jt.value("max_points", 0);
      if (jt.contains("time_budget_s") && !jt.at("time_budget_s").is_null()) {
        t.time_budget_s = jt.at("time_budget_s").get<double>();
      }
      for (const auto& js : jt.at("subtasks")) {
        SubTaskSpec st;
        st.id = js.at("id").get<std::string>();
        st.required_event = event_type_from_string(js.at("event").get<std::string>());
        if (js.contains("params")) {
          st.params = js.at("params").get<std::map<std::string, std::string>>();
        }
        t.subtasks.push_back(std::move(st));
      }
      const auto& ji = jt.at("instruction");
      t.instruction.text = ji.value("text", "");
      t.instruction.image_ref = opt_string(ji, "image");
      t.instruction.audio_ref = opt_string(ji, "audio");
      t.instruction.animation_ref = opt_string(ji, "animation");
      if (ji.contains("keyphrase_hints")) {
        t.instruction.keyphrase_hints = ji.at("keyphrase_hints").get<std::vector<std::string>>();
      }
      s.graph.tasks.push_back(std::move(t));
    }
    for (const auto& je : j.at("edges")) {
      s.graph.edges.emplace_back(task_id_from_string(je.at(0).get<std::string>()),
                                 task_id_from_string(je.at(1).get<std::string>()));
    }
    const auto& js = j.at("scores");
    for (const auto& [name, p] : js.at("tasks").items()) {
      s.table.task_points[task_id_from_string(name)] = p.get<int>();
    }
    s.table.aed_pad_points = js.value("aed_pad_points", 1);
    for (const auto& b : js.at("cpr_rate_bands")) {
      s.table.cpr_rate_bands.push_back(
          {b.at("lower").get<double>(), b.at("upper").get<double>(), b.at("points").get<int>()});
    }
    const auto& d = js.at("cpr_depth_band");
    s.table.cpr_depth_band = {d.at("lower").get<double>(), d.at("upper").get<double>(),
                              d.at("points").get<int>()};
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("scenario: ") + e.what());
  }
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open scenario " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, "scenario " + path + ": " + e.what());
  }
  return scenario_from_json(j);
}

}  // namespace bls
