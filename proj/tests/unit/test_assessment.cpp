#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <unistd.h>

#include "bls/assessment.hpp"
#include "bls/error.hpp"
#include "bls/script.hpp"
#include "oracles/oracles.hpp"

using namespace bls;
namespace fs = std::filesystem;

namespace {

SessionLog run_fixture(const std::string& name) {
  return runScript(load_script(std::string(BLS_FIXTURE_DIR) + "/scripts/" + name + ".json"), RunOptions{}).log;
}

TaskOutcome done(TaskId task, int position, std::vector<std::string> subtasks = {}) {
  TaskOutcome o;
  o.task = task;
  o.completed = true;
  o.executed_position = position;
  o.subtasks_done = std::move(subtasks);
  o.subtask_total = static_cast<int>(o.subtasks_done.size());
  return o;
}

CprSummary summary(int count, double rate, double depth) {
  CprSummary s;
  s.push_count = count;
  s.avg_rate_per_min = rate;
  s.avg_depth_cm = depth;
  return s;
}

std::vector<TaskOutcome> in_sequence(const std::vector<TaskId>& order) {
  std::vector<TaskOutcome> out;
  for (std::size_t i = 0; i < order.size(); ++i) out.push_back(done(order[i], static_cast<int>(i + 1)));
  return out;
}

bool has_hint(const DebriefReport& r, const std::string& prefix) {
  return std::any_of(r.hints.begin(), r.hints.end(), [&](const std::string& h) { return h.rfind(prefix, 0) == 0; });
}

}  // namespace

TEST_CASE("task points") {
  CHECK(scoreTask(TaskId::EnsureSafety, done(TaskId::EnsureSafety, 1)) == 2);
  CHECK(scoreTask(TaskId::CheckResponse, done(TaskId::CheckResponse, 2)) == 1);
  CHECK(scoreTask(TaskId::CheckBreathing, done(TaskId::CheckBreathing, 4)) == 0);
  CHECK(scoreTask(TaskId::TriggerShock, TaskOutcome{TaskId::TriggerShock}) == 0);

  CHECK(scoreTask(TaskId::PlaceAedPads, done(TaskId::PlaceAedPads, 10, {"pad-right", "pad-left"})) == 2);
  TaskOutcome one_pad{TaskId::PlaceAedPads};
  one_pad.subtasks_done = {"pad-right"};
  one_pad.subtask_total = 2;
  CHECK(scoreTask(TaskId::PlaceAedPads, one_pad) == 1);

  ScoreTable sparse = defaultScoreTable();
  sparse.task_points.erase(TaskId::Ventilate);
  try {
    scoreTask(TaskId::Ventilate, done(TaskId::Ventilate, 9), sparse);
    FAIL("expected UnknownTask");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownTask);
  }
}

TEST_CASE("maximum score matches the published table") {
  CHECK(maxAchievableScore(defaultScoreTable()) == oracle::published_max_score());
  CHECK(oracle::published_max_score() == 18);
}

TEST_CASE("CPR points follow the published bands") {
  CHECK(scoreCpr(summary(30, 105.0, 5.5)) == 4);
  CHECK(scoreCpr(summary(30, 90.0, 5.5)) == 3);
  CHECK(scoreCpr(summary(30, 150.0, 4.0)) == 0);
  CHECK(scoreCpr(summary(0, 105.0, 5.5)) == 0);
  for (double rate = 60.0; rate <= 160.0; rate += 0.5) {
    for (double depth = 3.0; depth <= 7.5; depth += 0.25) {
      CAPTURE(rate);
      CAPTURE(depth);
      CHECK(scoreCpr(summary(10, rate, depth)) == oracle::published_rate_points(rate) + oracle::published_depth_points(depth));
    }
  }
}

TEST_CASE("order fraction") {
  const auto graph = buildDefaultSequence();
  const auto order = topologicalOrder(graph);

  const auto perfect = in_sequence(order);
  CHECK(orderFraction(perfect, graph) == 1.0);

  auto reversed = order;
  std::reverse(reversed.begin(), reversed.end());
  CHECK(orderFraction(in_sequence(reversed), graph) == 0.0);

  // Swapping the first two tasks breaks the first three links.
  auto swapped = order;
  std::swap(swapped[0], swapped[1]);
  CHECK(orderFraction(in_sequence(swapped), graph) == doctest::Approx(9.0 / 12.0));

  // Incomplete tasks count as not in order.
  auto partial = perfect;
  partial.resize(3);
  CHECK(orderFraction(partial, graph) == doctest::Approx(3.0 / 12.0));
  CHECK(orderFraction({}, graph) == 0.0);
}

TEST_CASE("final score weighting") {
  CHECK(finalScore(14, 1.0) == 14.0);
  CHECK(finalScore(14, 0.0) == 7.0);
  CHECK(finalScore(14, 0.5) == 10.5);
  CHECK(round_to_hundredths(15.746) == doctest::Approx(15.75));
}

TEST_CASE("debrief of a perfect run") {
  const auto log = run_fixture("perfect");
  const auto r = buildDebrief(log, log.header.scenario.graph, log.header.scenario.table);
  CHECK(r.intermediate_score == 18);
  CHECK(r.max_score == 18);
  CHECK(r.order_fraction == 1.0);
  CHECK(r.final_score == 18.0);
  REQUIRE(r.hints.size() == 1);
  CHECK(r.hints[0] == "all steps completed correctly and in order - well done");
  CHECK_FALSE(r.previous_comparison);
  for (const auto& t : r.task_results) {
    CHECK(t.completed);
    CHECK(t.in_order);
    CHECK(t.subtask_completion == 1.0);
  }
  // Deterministic, down to the serialized form.
  CHECK(to_json(buildDebrief(log, log.header.scenario.graph, log.header.scenario.table)) == to_json(r));
  CHECK(to_json(debrief_from_json(to_json(r))) == to_json(r));
}

TEST_CASE("rate and depth hints") {
  auto log = run_fixture("perfect");
  log.cpr.avg_rate_per_min = 90.0;
  auto r = buildDebrief(log, log.header.scenario.graph, log.header.scenario.table);
  CHECK(has_hint(r, "increase compression rate toward 105/min (average was 90.0/min)"));
  CHECK(r.intermediate_score == 17);

  log.cpr.avg_rate_per_min = 130.0;
  log.cpr.avg_depth_cm = 4.2;
  log.cpr.full_release_always = false;
  r = buildDebrief(log, log.header.scenario.graph, log.header.scenario.table);
  CHECK(has_hint(r, "decrease compression rate"));
  CHECK(has_hint(r, "push deeper: aim for 5-6 cm (average was 4.2 cm)"));
  CHECK(has_hint(r, "release the chest fully"));
  CHECK_FALSE(has_hint(r, "all steps completed"));
}

TEST_CASE("shuffled, aborted and sloppy runs") {
  const auto shuffled = run_fixture("shuffled");
  auto r = buildDebrief(shuffled, shuffled.header.scenario.graph, shuffled.header.scenario.table);
  CHECK(r.intermediate_score == 18);
  CHECK(r.order_fraction == doctest::Approx(0.75));
  CHECK(r.final_score == 15.75);
  CHECK(has_hint(r, "follow the sequence: 3 steps were done out of order"));

  const auto aborted = run_fixture("aborted");
  r = buildDebrief(aborted, aborted.header.scenario.graph, aborted.header.scenario.table);
  CHECK(r.intermediate_score == 4);
  CHECK(r.final_score == 2.5);
  CHECK(has_hint(r, "CheckBreathing was not completed"));
  CHECK_FALSE(has_hint(r, "follow the sequence"));

  const auto sloppy = run_fixture("sloppy");
  r = buildDebrief(sloppy, sloppy.header.scenario.graph, sloppy.header.scenario.table);
  CHECK(has_hint(r, "CheckBreathing took longer than its 10 s time budget"));
}

TEST_CASE("history comparison") {
  const fs::path dir = fs::temp_directory_path() / ("bls_history_" + std::to_string(::getpid()));
  fs::remove_all(dir);

  auto first = run_fixture("aborted");
  first.header.meta.started_at = "2026-01-01T10:00:00Z";
  first.header.meta.session_id = "first";
  first.header.meta.trainee = "kim";
  const auto r1 = buildDebrief(first, first.header.scenario.graph, first.header.scenario.table,
                               load_history(dir.string(), "kim"));
  CHECK_FALSE(r1.previous_comparison);
  save_to_history(r1, dir.string());

  auto second = run_fixture("perfect");
  second.header.meta.started_at = "2026-01-02T10:00:00Z";
  second.header.meta.session_id = "second";
  second.header.meta.trainee = "kim";
  const auto past = load_history(dir.string(), "kim", "second");
  REQUIRE(past.size() == 1);
  const auto r2 = buildDebrief(second, second.header.scenario.graph, second.header.scenario.table, past);
  REQUIRE(r2.previous_comparison);
  CHECK(r2.previous_comparison->session_id == "first");
  CHECK(r2.previous_comparison->final_score == 2.5);
  save_to_history(r2, dir.string());

  // Another trainee shares the directory without seeing kim's sessions.
  CHECK(load_history(dir.string(), "lee").empty());
  CHECK(load_history(dir.string(), "kim").size() == 2);
  // A missing directory is an empty history.
  CHECK(load_history((dir / "nope").string(), "kim").empty());
  fs::remove_all(dir);
}

TEST_CASE("text rendering mentions the essentials") {
  const auto log = run_fixture("shuffled");
  const auto text = render_text(buildDebrief(log, log.header.scenario.graph, log.header.scenario.table));
  CHECK(text.find("15.75") != std::string::npos);
  CHECK(text.find("PerformCompressions") != std::string::npos);
  CHECK(text.find("follow the sequence") != std::string::npos);
}
