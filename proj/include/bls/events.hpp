#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "bls/task_id.hpp"

namespace bls {

using TimestampMs = std::int64_t;

// Trainee actions the engine can recognize. The payload shape is fixed per kind.
namespace ev {
struct GlassDisposed {};
struct HandsOnShoulders {};
struct Keyphrase {
  std::string id;
};
struct HeadTiltReached {
  double degrees = 0.0;
};
struct HeadAboveMouth {
  std::int64_t hold_ms = 0;
};
struct PhoneDialed {
  std::string number;
};
struct AedPadPlaced {
  std::string side;
};
struct AedShockPressed {};
struct CompressionPush {
  double depth_cm = 0.0;
  TimestampMs start_ms = 0;
  TimestampMs end_ms = 0;
};
struct VentilationDelivered {};
struct PositionTriggerEntered {
  std::string zone;
};
}  // namespace ev

using EventKind =
    std::variant<ev::GlassDisposed, ev::HandsOnShoulders, ev::Keyphrase, ev::HeadTiltReached,
                 ev::HeadAboveMouth, ev::PhoneDialed, ev::AedPadPlaced, ev::AedShockPressed,
                 ev::CompressionPush, ev::VentilationDelivered, ev::PositionTriggerEntered>;

// Discriminator of EventKind, used by subtask specs to name the event they wait for.
enum class EventType {
  GlassDisposed,
  HandsOnShoulders,
  Keyphrase,
  HeadTiltReached,
  HeadAboveMouth,
  PhoneDialed,
  AedPadPlaced,
  AedShockPressed,
  CompressionPush,
  VentilationDelivered,
  PositionTriggerEntered,
};

inline EventType type_of(const EventKind& kind) { return static_cast<EventType>(kind.index()); }

std::string_view to_string(EventType type);
EventType event_type_from_string(std::string_view name);

enum class EventSource { Ui, Device, Script };

std::string_view to_string(EventSource source);
EventSource event_source_from_string(std::string_view name);

struct SessionEvent {
  TimestampMs ts = 0;
  EventKind kind;
  EventSource source = EventSource::Script;
};

namespace fb {
struct SoundCue {};
struct TaskCompleted {
  TaskId task;
};
struct InstructionShown {
  TaskId task;
  std::string text;
};
struct LiveCpr {
  std::optional<double> rate_per_min;
  double depth_cm = 0.0;
  int count = 0;
};
struct TimeBudgetExceeded {
  TaskId task;
};
struct KeyphraseHint {
  std::vector<std::string> phrases;
};
}  // namespace fb

using FeedbackKind = std::variant<fb::SoundCue, fb::TaskCompleted, fb::InstructionShown,
                                  fb::LiveCpr, fb::TimeBudgetExceeded, fb::KeyphraseHint>;

struct FeedbackEvent {
  TimestampMs ts = 0;
  FeedbackKind kind;
};

template <class T>
bool holds(const FeedbackEvent& f) {
  return std::holds_alternative<T>(f.kind);
}

nlohmann::json to_json(const EventKind& kind);
EventKind event_kind_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SessionEvent& e);
SessionEvent session_event_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FeedbackEvent& f);
FeedbackEvent feedback_event_from_json(const nlohmann::json& j);

}  // namespace bls
