#pragma once

#include <array>
#include <string_view>

namespace bls {

enum class TaskId {
  EnsureSafety,
  CheckResponse,
  OpenAirways,
  CheckBreathing,
  CommunicateBreathingStatus,
  CallAmbulance,
  SendForAed,
  PerformCompressions,
  Ventilate,
  PlaceAedPads,
  MakePeopleStandBack,
  TriggerShock,
};

inline constexpr std::array<TaskId, 12> kAllTasks = {
    TaskId::EnsureSafety,       TaskId::CheckResponse,
    TaskId::OpenAirways,        TaskId::CheckBreathing,
    TaskId::CommunicateBreathingStatus, TaskId::CallAmbulance,
    TaskId::SendForAed,         TaskId::PerformCompressions,
    TaskId::Ventilate,          TaskId::PlaceAedPads,
    TaskId::MakePeopleStandBack, TaskId::TriggerShock,
};

std::string_view to_string(TaskId id);

// Throws Error(UnknownTask) for names outside the closed set.
TaskId task_id_from_string(std::string_view name);

}  // namespace bls
