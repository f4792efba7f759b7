#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "bls/cpr.hpp"
#include "bls/events.hpp"
#include "bls/sequence.hpp"

namespace bls {

enum class TrainingMode { Learning, Training };

std::string_view to_string(TrainingMode mode);
TrainingMode training_mode_from_string(std::string_view name);

struct SessionConfig {
  CprConfig cpr;
  double tilt_threshold_deg = 20.0;
  TimestampMs tilt_hold_ms = 500;
  TimestampMs calibration_window_ms = 1000;
};

nlohmann::json to_json(const SessionConfig& c);
SessionConfig session_config_from_json(const nlohmann::json& j);

struct SessionMeta {
  std::string session_id = "session";
  std::string trainee = "anonymous";
  std::string started_at = "1970-01-01T00:00:00Z";
  TimestampMs start_ts = 0;
  bool device_attached = false;
};

// Command channel to a manikin. Implementations must return the device's reply line
// to a single command, or throw Error(DeviceUnreachable).
class DeviceLink {
 public:
  virtual ~DeviceLink() = default;
  virtual std::string command(const std::string& line) = 0;
};

// Tracks one base task: counts matching events per subtask until every subtask is done.
class TaskModule {
 public:
  explicit TaskModule(const TaskSpec& spec);

  TaskId task() const { return spec_.id; }
  // Returns true if the event advanced an incomplete subtask.
  bool offer(const EventKind& event);
  bool complete() const;
  bool subtask_done(std::size_t i) const;
  std::vector<std::string> done_subtasks() const;
  double completion_fraction() const;
  const TaskSpec& spec() const { return spec_; }

 private:
  TaskSpec spec_;
  std::vector<int> counts_;
};

struct TaskOutcome {
  TaskId task = TaskId::EnsureSafety;
  bool completed = false;
  std::optional<TimestampMs> started_ts;
  std::optional<TimestampMs> finished_ts;
  int executed_position = 0;  // 1-based completion order; 0 when not completed
  std::vector<std::string> subtasks_done;
  int subtask_total = 0;
};

nlohmann::json to_json(const TaskOutcome& o);
TaskOutcome task_outcome_from_json(const nlohmann::json& j);

// Journal entries, in the exact order the engine saw or produced them. Inputs carry the
// number of sensor-trace frames consumed before them so replay can interleave exactly.
namespace rec {
struct Event {
  SessionEvent event;
  std::size_t frames_before = 0;
};
struct Tick {
  TimestampMs now = 0;
  std::size_t frames_before = 0;
};
struct Feedback {
  FeedbackEvent feedback;
};
struct Recalibrate {
  TimestampMs ts = 0;
  std::size_t frames_before = 0;
};
struct Finish {
  TimestampMs ts = 0;
  bool aborted = false;
  std::size_t frames_before = 0;
};
}  // namespace rec

using JournalRecord = std::variant<rec::Event, rec::Tick, rec::Feedback, rec::Recalibrate, rec::Finish>;

struct SessionHeader {
  int schema = 1;
  SessionMeta meta;
  TrainingMode mode = TrainingMode::Learning;
  Scenario scenario;
  SessionConfig config;
};

struct SessionLog {
  SessionHeader header;
  std::vector<JournalRecord> journal;
  std::vector<std::string> sensor_trace;  // SMP lines, newline-terminated
  std::vector<TaskOutcome> outcomes;      // topological order
  CprSummary cpr;
  TimestampMs total_duration_ms = 0;
  bool aborted = false;

  std::vector<SessionEvent> events() const;
  std::vector<FeedbackEvent> feedback() const;
  const TaskOutcome* outcome(TaskId id) const;
};

// Single-writer state machine for one training session. Inputs (events, device frames,
// clock ticks) must be applied in timestamp order by one consumer.
class Session {
 public:
  // Validates the graph, connects the device (RESET + START all) when a link is given,
  // and emits the first instruction in learning mode. Throws InvalidGraph or
  // DeviceUnreachable.
  static Session start(Scenario scenario, TrainingMode mode, SessionConfig config, SessionMeta meta,
                       DeviceLink* device = nullptr);

  std::vector<FeedbackEvent> applyEvent(const SessionEvent& event);
  std::vector<FeedbackEvent> ingestDeviceFrame(std::string_view line);
  std::vector<FeedbackEvent> tickClock(TimestampMs now);
  void recalibrate(TimestampMs ts);
  SessionLog finish(bool abort = false);

  TrainingMode mode() const { return mode_; }
  bool finished() const { return finished_; }
  bool endReached() const;
  std::optional<TaskId> currentTask() const;
  TimestampMs now() const { return now_; }
  const std::vector<FeedbackEvent>& feedback() const { return feedback_; }
  const std::vector<JournalRecord>& journal() const { return journal_; }
  const PushTracker& cprTracker() const { return tracker_; }
  const Scenario& scenario() const { return scenario_; }
  const SessionMeta& meta() const { return meta_; }
  const TaskOutcome& outcome(TaskId id) const;
  bool calibrated() const { return tracker_.calibrated(); }

 private:
  Session(Scenario scenario, TrainingMode mode, SessionConfig config, SessionMeta meta);

  bool taskActive(TaskId id) const;
  bool awaitingEvent(EventType type) const;
  std::vector<FeedbackEvent> dispatch(const SessionEvent& event);
  void emit(std::vector<FeedbackEvent>& out, TimestampMs ts, FeedbackKind kind);
  void announce(std::vector<FeedbackEvent>& out, TimestampMs ts);
  void checkActive() const;
  std::vector<FeedbackEvent> ingestDistance(const SensorSample& s);
  std::vector<FeedbackEvent> ingestGyro(const SensorSample& s);

  Scenario scenario_;
  TrainingMode mode_;
  SessionConfig config_;
  SessionMeta meta_;
  std::vector<TaskId> order_;
  std::vector<TaskModule> modules_;  // parallel to order_
  std::map<TaskId, TaskOutcome> outcomes_;
  std::map<TaskId, bool> budget_fired_;
  PushTracker tracker_;
  TiltTracker tilt_;
  bool tilt_latched_ = false;
  bool calibrating_ = false;
  std::vector<SensorSample> calibration_;
  std::map<SensorKind, TimestampMs> last_frame_ts_;
  std::vector<std::string> trace_;
  std::vector<JournalRecord> journal_;
  std::vector<FeedbackEvent> feedback_;
  TimestampMs now_ = 0;
  TimestampMs last_completion_ts_ = 0;
  int executed_count_ = 0;
  bool finished_ = false;
  bool aborted_ = false;
};

}  // namespace bls
