#include "bls/session.hpp"

#include <algorithm>

#include "bls/error.hpp"
#include "bls/wire.hpp"

namespace bls {

using nlohmann::json;

std::string_view to_string(TrainingMode mode) {
  return mode == TrainingMode::Learning ? "learning" : "training";
}

TrainingMode training_mode_from_string(std::string_view name) {
  if (name == "learning") return TrainingMode::Learning;
  if (name == "training") return TrainingMode::Training;
  throw Error(ErrorCode::InvalidArgument, "mode must be learning or training");
}

json to_json(const SessionConfig& c) {
  return {{"cpr", to_json(c.cpr)},
          {"tilt_threshold_deg", c.tilt_threshold_deg},
          {"tilt_hold_ms", c.tilt_hold_ms},
          {"calibration_window_ms", c.calibration_window_ms}};
}

SessionConfig session_config_from_json(const json& j) {
  SessionConfig c;
  if (j.contains("cpr")) c.cpr = cpr_config_from_json(j.at("cpr"));
  c.tilt_threshold_deg = j.value("tilt_threshold_deg", c.tilt_threshold_deg);
  c.tilt_hold_ms = j.value("tilt_hold_ms", c.tilt_hold_ms);
  c.calibration_window_ms = j.value("calibration_window_ms", c.calibration_window_ms);
  return c;
}

json to_json(const TaskOutcome& o) {
  auto opt = [](const std::optional<TimestampMs>& v) { return v ? json(*v) : json(nullptr); };
  return {{"task", to_string(o.task)},
          {"completed", o.completed},
          {"started_ts", opt(o.started_ts)},
          {"finished_ts", opt(o.finished_ts)},
          {"executed_position", o.executed_position},
          {"subtasks_done", o.subtasks_done},
          {"subtask_total", o.subtask_total}};
}

TaskOutcome task_outcome_from_json(const json& j) {
  TaskOutcome o;
  o.task = task_id_from_string(j.at("task").get<std::string>());
  o.completed = j.at("completed").get<bool>();
  if (!j.at("started_ts").is_null()) o.started_ts = j.at("started_ts").get<TimestampMs>();
  if (!j.at("finished_ts").is_null()) o.finished_ts = j.at("finished_ts").get<TimestampMs>();
  o.executed_position = j.at("executed_position").get<int>();
  o.subtasks_done = j.at("subtasks_done").get<std::vector<std::string>>();
  o.subtask_total = j.at("subtask_total").get<int>();
  return o;
}

std::vector<SessionEvent> SessionLog::events() const {
  std::vector<SessionEvent> out;
  for (const auto& r : journal) {
    if (const auto* e = std::get_if<rec::Event>(&r)) out.push_back(e->event);
  }
  return out;
}

std::vector<FeedbackEvent> SessionLog::feedback() const {
  std::vector<FeedbackEvent> out;
  for (const auto& r : journal) {
    if (const auto* f = std::get_if<rec::Feedback>(&r)) out.push_back(f->feedback);
  }
  return out;
}

const TaskOutcome* SessionLog::outcome(TaskId id) const {
  for (const auto& o : outcomes) {
    if (o.task == id) return &o;
  }
  return nullptr;
}

// --- TaskModule -------------------------------------------------------------

TaskModule::TaskModule(const TaskSpec& spec) : spec_(spec), counts_(spec.subtasks.size(), 0) {}

bool TaskModule::offer(const EventKind& event) {
  for (std::size_t i = 0; i < spec_.subtasks.size(); ++i) {
    const auto& st = spec_.subtasks[i];
    if (counts_[i] >= st.required_count() || !st.matches(event)) continue;
    ++counts_[i];
    return true;
  }
  return false;
}

bool TaskModule::subtask_done(std::size_t i) const {
  return counts_.at(i) >= spec_.subtasks.at(i).required_count();
}

bool TaskModule::complete() const {
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    if (!subtask_done(i)) return false;
  }
  return true;
}

std::vector<std::string> TaskModule::done_subtasks() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    if (subtask_done(i)) out.push_back(spec_.subtasks[i].id);
  }
  return out;
}

double TaskModule::completion_fraction() const {
  if (counts_.empty()) return 1.0;
  double done = 0.0;
  for (std::size_t i = 0; i < counts_.size(); ++i) done += subtask_done(i) ? 1.0 : 0.0;
  return done / static_cast<double>(counts_.size());
}

// --- Session ----------------------------------------------------------------

Session::Session(Scenario scenario, TrainingMode mode, SessionConfig config, SessionMeta meta)
    : scenario_(std::move(scenario)),
      mode_(mode),
      config_(config),
      meta_(std::move(meta)),
      tracker_(config.cpr),
      tilt_(config.tilt_hold_ms) {}

Session Session::start(Scenario scenario, TrainingMode mode, SessionConfig config, SessionMeta meta,
                       DeviceLink* device) {
  const auto violations = validateSequence(scenario.graph);
  if (!violations.empty()) {
    std::string msg;
    for (const auto& v : violations) msg += std::string(to_string(v.kind)) + "(" + v.detail + ") ";
    throw Error(ErrorCode::InvalidGraph, msg);
  }
  config.cpr.validate();
  if (device) {
    for (const char* line : {"CMD RESET all\n", "CMD START all\n"}) {
      std::string reply;
      try {
        reply = device->command(line);
      } catch (const Error& e) {
        throw Error(ErrorCode::DeviceUnreachable, e.what());
      }
      if (reply.rfind("ACK ", 0) != 0) {
        throw Error(ErrorCode::DeviceUnreachable, "device replied '" + reply + "'");
      }
    }
    meta.device_attached = true;
  }

  Session s(std::move(scenario), mode, config, std::move(meta));
  s.order_ = topologicalOrder(s.scenario_.graph);
  for (TaskId id : s.order_) {
    s.modules_.emplace_back(*s.scenario_.graph.find(id));
    TaskOutcome o;
    o.task = id;
    o.subtask_total = static_cast<int>(s.scenario_.graph.find(id)->subtasks.size());
    s.outcomes_[id] = o;
  }
  s.now_ = s.meta_.start_ts;
  s.last_completion_ts_ = s.meta_.start_ts;
  s.calibrating_ = s.meta_.device_attached;
  std::vector<FeedbackEvent> initial;
  s.announce(initial, s.now_);
  return s;
}

const TaskOutcome& Session::outcome(TaskId id) const {
  auto it = outcomes_.find(id);
  if (it == outcomes_.end()) throw Error(ErrorCode::UnknownTask, std::string(to_string(id)));
  return it->second;
}

bool Session::endReached() const { return outcome(scenario_.graph.end).completed; }

std::optional<TaskId> Session::currentTask() const {
  for (std::size_t i = 0; i < order_.size(); ++i) {
    if (!modules_[i].complete()) return order_[i];
  }
  return std::nullopt;
}

bool Session::taskActive(TaskId id) const {
  if (outcome(id).completed) return false;
  return mode_ == TrainingMode::Training || currentTask() == id;
}

bool Session::awaitingEvent(EventType type) const {
  for (std::size_t i = 0; i < order_.size(); ++i) {
    if (!taskActive(order_[i])) continue;
    const auto& subs = modules_[i].spec().subtasks;
    for (std::size_t k = 0; k < subs.size(); ++k) {
      if (subs[k].required_event == type && !modules_[i].subtask_done(k)) return true;
    }
  }
  return false;
}

void Session::checkActive() const {
  if (finished_) throw Error(ErrorCode::SessionFinished, "session " + meta_.session_id + " is finished");
}

void Session::emit(std::vector<FeedbackEvent>& out, TimestampMs ts, FeedbackKind kind) {
  FeedbackEvent f{ts, std::move(kind)};
  out.push_back(f);
  feedback_.push_back(f);
  journal_.push_back(rec::Feedback{std::move(f)});
}

void Session::announce(std::vector<FeedbackEvent>& out, TimestampMs ts) {
  if (mode_ != TrainingMode::Learning) return;
  const auto current = currentTask();
  if (!current) return;
  const auto* spec = scenario_.graph.find(*current);
  emit(out, ts, fb::InstructionShown{*current, spec->instruction.text});
  if (!spec->instruction.keyphrase_hints.empty()) {
    emit(out, ts, fb::KeyphraseHint{spec->instruction.keyphrase_hints});
  }
}

std::vector<FeedbackEvent> Session::dispatch(const SessionEvent& event) {
  std::vector<FeedbackEvent> out;
  for (std::size_t i = 0; i < order_.size(); ++i) {
    const TaskId id = order_[i];
    if (!taskActive(id)) continue;
    if (!modules_[i].offer(event.kind)) continue;

    auto& o = outcomes_[id];
    o.subtasks_done = modules_[i].done_subtasks();
    if (modules_[i].complete()) {
      o.completed = true;
      o.started_ts = last_completion_ts_;
      o.finished_ts = event.ts;
      o.executed_position = ++executed_count_;
      last_completion_ts_ = event.ts;
      emit(out, event.ts, fb::SoundCue{});
      emit(out, event.ts, fb::TaskCompleted{id});
      announce(out, event.ts);
    }
    break;
  }
  return out;
}

std::vector<FeedbackEvent> Session::applyEvent(const SessionEvent& event) {
  checkActive();
  if (event.ts < now_) {
    throw Error(ErrorCode::TimestampRegression,
                "event ts " + std::to_string(event.ts) + " < session clock " + std::to_string(now_));
  }
  now_ = event.ts;
  journal_.push_back(rec::Event{event, trace_.size()});
  return dispatch(event);
}

std::vector<FeedbackEvent> Session::ingestDeviceFrame(std::string_view line) {
  checkActive();
  if (!meta_.device_attached) throw Error(ErrorCode::InvalidArgument, "no device attached");
  const wire::Frame frame = wire::parse(line);
  const auto* smp = std::get_if<wire::Sample>(&frame);
  if (!smp) {
    if (std::holds_alternative<wire::Ack>(frame)) return {};
    throw Error(ErrorCode::MalformedFrame, "expected a sample frame");
  }
  const SensorSample sample = wire::to_sensor_sample(*smp);
  if (auto it = last_frame_ts_.find(sample.sensor); it != last_frame_ts_.end() && sample.ts < it->second) {
    throw Error(ErrorCode::TimestampRegression, "frame ts went backwards");
  }
  last_frame_ts_[sample.sensor] = sample.ts;
  trace_.push_back(wire::format(*smp));
  now_ = std::max(now_, sample.ts);
  return sample.sensor == SensorKind::Distance ? ingestDistance(sample) : ingestGyro(sample);
}

std::vector<FeedbackEvent> Session::ingestDistance(const SensorSample& s) {
  if (calibrating_) {
    const bool window_full = !calibration_.empty() &&
                             s.ts - calibration_.front().ts >= config_.calibration_window_ms &&
                             static_cast<int>(calibration_.size()) >= config_.cpr.min_calibration_samples;
    if (!window_full) {
      calibration_.push_back(s);
      return {};
    }
    tracker_.calibrate(calibrateZeroLevel(calibration_, config_.cpr.min_calibration_samples,
                                          config_.cpr.min_calibration_span_ms));
    calibration_.clear();
    calibrating_ = false;
  }

  const auto result = tracker_.ingest(s);
  std::vector<FeedbackEvent> out;
  if (!result.push) return out;

  if (awaitingEvent(EventType::CompressionPush)) {
    emit(out, now_,
         fb::LiveCpr{result.metrics.displayed_rate, result.push->depth_cm, result.metrics.push_count});
  }
  const SessionEvent push{now_,
                          ev::CompressionPush{result.push->depth_cm, result.push->start_ts, result.push->end_ts},
                          EventSource::Device};
  journal_.push_back(rec::Event{push, trace_.size()});
  auto more = dispatch(push);
  out.insert(out.end(), more.begin(), more.end());
  return out;
}

std::vector<FeedbackEvent> Session::ingestGyro(const SensorSample& s) {
  const auto sustained = tilt_.ingest(s);
  if (!sustained || *sustained < config_.tilt_threshold_deg) {
    tilt_latched_ = false;
    return {};
  }
  if (tilt_latched_ || !awaitingEvent(EventType::HeadTiltReached)) return {};
  tilt_latched_ = true;
  const SessionEvent tilt{now_, ev::HeadTiltReached{*sustained}, EventSource::Device};
  journal_.push_back(rec::Event{tilt, trace_.size()});
  return dispatch(tilt);
}

std::vector<FeedbackEvent> Session::tickClock(TimestampMs now) {
  checkActive();
  now_ = std::max(now_, now);
  journal_.push_back(rec::Tick{now_, trace_.size()});
  std::vector<FeedbackEvent> out;
  const auto current = currentTask();
  if (!current) return out;
  const auto* spec = scenario_.graph.find(*current);
  if (!spec->time_budget_s || budget_fired_[*current]) return out;
  const auto budget_ms = static_cast<TimestampMs>(*spec->time_budget_s * 1000.0);
  if (now_ - last_completion_ts_ > budget_ms) {
    budget_fired_[*current] = true;
    emit(out, now_, fb::TimeBudgetExceeded{*current});
  }
  return out;
}

void Session::recalibrate(TimestampMs ts) {
  checkActive();
  now_ = std::max(now_, ts);
  journal_.push_back(rec::Recalibrate{now_, trace_.size()});
  calibrating_ = meta_.device_attached;
  calibration_.clear();
}

SessionLog Session::finish(bool abort) {
  checkActive();
  if (!abort && !endReached()) {
    throw Error(ErrorCode::SessionIncomplete, "end task not completed; abort explicitly to finish early");
  }
  journal_.push_back(rec::Finish{now_, abort, trace_.size()});
  finished_ = true;
  aborted_ = abort;

  SessionLog log;
  log.header.meta = meta_;
  log.header.mode = mode_;
  log.header.scenario = scenario_;
  log.header.config = config_;
  log.journal = journal_;
  log.sensor_trace = trace_;
  for (TaskId id : order_) log.outcomes.push_back(outcomes_.at(id));
  log.cpr = summarize(tracker_.events());
  log.total_duration_ms = now_ - meta_.start_ts;
  log.aborted = abort;
  return log;
}

}  // namespace bls
