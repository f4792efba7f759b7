#include "bls/events.hpp"

#include "bls/error.hpp"

namespace bls {

using nlohmann::json;

std::string_view to_string(EventType type) {
  switch (type) {
    case EventType::GlassDisposed: return "GlassDisposed";
    case EventType::HandsOnShoulders: return "HandsOnShoulders";
    case EventType::Keyphrase: return "Keyphrase";
    case EventType::HeadTiltReached: return "HeadTiltReached";
    case EventType::HeadAboveMouth: return "HeadAboveMouth";
    case EventType::PhoneDialed: return "PhoneDialed";
    case EventType::AedPadPlaced: return "AedPadPlaced";
    case EventType::AedShockPressed: return "AedShockPressed";
    case EventType::CompressionPush: return "CompressionPush";
    case EventType::VentilationDelivered: return "VentilationDelivered";
    case EventType::PositionTriggerEntered: return "PositionTriggerEntered";
  }
  return "?";
}

EventType event_type_from_string(std::string_view name) {
  for (int i = 0; i < static_cast<int>(std::variant_size_v<EventKind>); ++i) {
    auto t = static_cast<EventType>(i);
    if (to_string(t) == name) return t;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown event kind '" + std::string(name) + "'");
}

std::string_view to_string(EventSource source) {
  switch (source) {
    case EventSource::Ui: return "ui";
    case EventSource::Device: return "device";
    case EventSource::Script: return "script";
  }
  return "?";
}

EventSource event_source_from_string(std::string_view name) {
  if (name == "ui") return EventSource::Ui;
  if (name == "device") return EventSource::Device;
  if (name == "script") return EventSource::Script;
  throw Error(ErrorCode::InvalidArgument, "unknown event source '" + std::string(name) + "'");
}

json to_json(const EventKind& kind) {
  json j = {{"kind", to_string(type_of(kind))}};
  std::visit(
      [&j](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, ev::Keyphrase>) {
          j["keyphrase"] = e.id;
        } else if constexpr (std::is_same_v<T, ev::HeadTiltReached>) {
          j["degrees"] = e.degrees;
        } else if constexpr (std::is_same_v<T, ev::HeadAboveMouth>) {
          j["hold_ms"] = e.hold_ms;
        } else if constexpr (std::is_same_v<T, ev::PhoneDialed>) {
          j["number"] = e.number;
        } else if constexpr (std::is_same_v<T, ev::AedPadPlaced>) {
          j["side"] = e.side;
        } else if constexpr (std::is_same_v<T, ev::CompressionPush>) {
          j["depth_cm"] = e.depth_cm;
          j["start_ms"] = e.start_ms;
          j["end_ms"] = e.end_ms;
        } else if constexpr (std::is_same_v<T, ev::PositionTriggerEntered>) {
          j["zone"] = e.zone;
        }
      },
      kind);
  return j;
}

EventKind event_kind_from_json(const json& j) {
  try {
    switch (event_type_from_string(j.at("kind").get<std::string>())) {
      case EventType::GlassDisposed: return ev::GlassDisposed{};
      case EventType::HandsOnShoulders: return ev::HandsOnShoulders{};
      case EventType::Keyphrase: return ev::Keyphrase{j.at("keyphrase").get<std::string>()};
      case EventType::HeadTiltReached: return ev::HeadTiltReached{j.at("degrees").get<double>()};
      case EventType::HeadAboveMouth: return ev::HeadAboveMouth{j.at("hold_ms").get<std::int64_t>()};
      case EventType::PhoneDialed: return ev::PhoneDialed{j.at("number").get<std::string>()};
      case EventType::AedPadPlaced: return ev::AedPadPlaced{j.at("side").get<std::string>()};
      case EventType::AedShockPressed: return ev::AedShockPressed{};
      case EventType::CompressionPush:
        return ev::CompressionPush{j.at("depth_cm").get<double>(), j.at("start_ms").get<TimestampMs>(),
                                   j.at("end_ms").get<TimestampMs>()};
      case EventType::VentilationDelivered: return ev::VentilationDelivered{};
      case EventType::PositionTriggerEntered:
        return ev::PositionTriggerEntered{j.at("zone").get<std::string>()};
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("event payload: ") + e.what());
  }
  throw Error(ErrorCode::InvalidArgument, "event payload");
}

json to_json(const SessionEvent& e) {
  json j = to_json(e.kind);
  j["ts"] = e.ts;
  j["source"] = to_string(e.source);
  return j;
}

SessionEvent session_event_from_json(const json& j) {
  SessionEvent e;
  e.kind = event_kind_from_json(j);
  try {
    e.ts = j.at("ts").get<TimestampMs>();
    e.source = event_source_from_string(j.value("source", "script"));
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::InvalidArgument, std::string("event: ") + ex.what());
  }
  return e;
}

json to_json(const FeedbackEvent& f) {
  json j = {{"ts", f.ts}};
  std::visit(
      [&j](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, fb::SoundCue>) {
          j["kind"] = "SoundCue";
        } else if constexpr (std::is_same_v<T, fb::TaskCompleted>) {
          j["kind"] = "TaskCompleted";
          j["task"] = to_string(k.task);
        } else if constexpr (std::is_same_v<T, fb::InstructionShown>) {
          j["kind"] = "InstructionShown";
          j["task"] = to_string(k.task);
          j["text"] = k.text;
        } else if constexpr (std::is_same_v<T, fb::LiveCpr>) {
          j["kind"] = "LiveCpr";
          j["rate"] = k.rate_per_min ? json(*k.rate_per_min) : json(nullptr);
          j["depth_cm"] = k.depth_cm;
          j["count"] = k.count;
        } else if constexpr (std::is_same_v<T, fb::TimeBudgetExceeded>) {
          j["kind"] = "TimeBudgetExceeded";
          j["task"] = to_string(k.task);
        } else if constexpr (std::is_same_v<T, fb::KeyphraseHint>) {
          j["kind"] = "KeyphraseHint";
          j["phrases"] = k.phrases;
        }
      },
      f.kind);
  return j;
}

FeedbackEvent feedback_event_from_json(const json& j) {
  try {
    FeedbackEvent f;
    f.ts = j.at("ts").get<TimestampMs>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "SoundCue") {
      f.kind = fb::SoundCue{};
    } else if (kind == "TaskCompleted") {
      f.kind = fb::TaskCompleted{task_id_from_string(j.at("task").get<std::string>())};
    } else if (kind == "InstructionShown") {
      f.kind = fb::InstructionShown{task_id_from_string(j.at("task").get<std::string>()),
                                    j.at("text").get<std::string>()};
    } else if (kind == "LiveCpr") {
      fb::LiveCpr live;
      if (!j.at("rate").is_null()) live.rate_per_min = j.at("rate").get<double>();
      live.depth_cm = j.at("depth_cm").get<double>();
      live.count = j.at("count").get<int>();
      f.kind = live;
    } else if (kind == "TimeBudgetExceeded") {
      f.kind = fb::TimeBudgetExceeded{task_id_from_string(j.at("task").get<std::string>())};
    } else if (kind == "KeyphraseHint") {
      f.kind = fb::KeyphraseHint{j.at("phrases").get<std::vector<std::string>>()};
    } else {
      throw Error(ErrorCode::InvalidArgument, "unknown feedback kind '" + kind + "'");
    }
    return f;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("feedback: ") + e.what());
  }
}

}  // namespace bls
