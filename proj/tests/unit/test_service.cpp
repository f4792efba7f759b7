#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <thread>
#include <unistd.h>

#include <httplib.h>
#include <json.hpp>

#include "bls/service.hpp"

using namespace bls;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct RunningService {
  TrainerService service;
  int port = 0;
  std::thread thread;
  httplib::Client client;

  explicit RunningService(ServiceOptions options)
      : service(std::move(options)), port(service.bind(0)), thread([this] { service.run(); }),
        client("127.0.0.1", port) {
    client.set_read_timeout(5, 0);
    for (int i = 0; i < 100 && !client.Get("/scenarios"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  ~RunningService() {
    service.stop();
    thread.join();
  }

  json post(const std::string& path, const json& body, int expect) {
    auto res = client.Post(path, body.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == expect);
    return json::parse(res->body);
  }
};

std::vector<json> sse_records(const std::string& body, const std::string& event = "feedback") {
  std::vector<json> out;
  std::size_t pos = 0;
  const std::string marker = "event: " + event + "\ndata: ";
  while ((pos = body.find(marker, pos)) != std::string::npos) {
    pos += marker.size();
    const auto end = body.find('\n', pos);
    out.push_back(json::parse(body.substr(pos, end - pos)));
  }
  return out;
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("bls_service_" + std::to_string(::getpid()))) { fs::remove_all(path); }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("learning session over HTTP") {
  TempDir tmp;
  ServiceOptions opts;
  opts.history_dir = (tmp.path / "history").string();
  opts.log_dir = (tmp.path / "logs").string();
  RunningService svc(opts);

  auto res = svc.client.Get("/scenarios");
  REQUIRE(res);
  CHECK(json::parse(res->body).at("scenarios") == json::array({"default"}));

  const json created = svc.post("/sessions", {{"trainee", "kim"}, {"mode", "learning"}}, 201);
  const std::string id = created.at("session_id");
  CHECK(id == "live-000001");
  REQUIRE(created.at("feedback").size() == 1);
  CHECK(created.at("feedback")[0].at("kind") == "InstructionShown");
  CHECK(created.at("feedback")[0].at("task") == "EnsureSafety");

  // Stream feedback live; the GlassDisposed cues arrive without polling.
  std::string streamed;
  std::thread reader([&] {
    httplib::Client c("127.0.0.1", svc.port);
    c.set_read_timeout(5, 0);
    c.Get("/sessions/" + id + "/feedback?from=1", [&](const char* data, std::size_t n) {
      streamed.append(data, n);
      return streamed.find("KeyphraseHint") == std::string::npos;
    });
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(100));
  const json posted = svc.post("/sessions/" + id + "/events", {{"kind", "GlassDisposed"}}, 200);
  reader.join();
  const auto live = sse_records(streamed);
  REQUIRE(live.size() >= 4);
  CHECK(live[0].at("kind") == "SoundCue");
  CHECK(live[1].at("kind") == "TaskCompleted");
  CHECK(live[2].at("kind") == "InstructionShown");
  CHECK(live[2].at("task") == "CheckResponse");
  CHECK(posted.at("feedback").size() == 4);

  // Finishing early needs an explicit abort.
  auto bad = svc.client.Post("/sessions/" + id + "/finish", "{}", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 409);
  CHECK(json::parse(bad->body).at("error") == "session-incomplete");

  auto not_yet = svc.client.Get("/sessions/" + id + "/report");
  REQUIRE(not_yet);
  CHECK(not_yet->status == 409);

  const json debrief = svc.post("/sessions/" + id + "/finish", {{"abort", true}}, 200);
  CHECK(debrief.at("kind") == "debrief");
  CHECK(debrief.at("session_id") == id);
  CHECK(debrief.at("intermediate_score") == 2);

  auto text = svc.client.Get("/sessions/" + id + "/report?format=text");
  REQUIRE(text);
  CHECK(text->status == 200);
  CHECK(text->body.find("CheckResponse was not completed") != std::string::npos);

  auto structured = svc.client.Get("/sessions/" + id + "/report");
  REQUIRE(structured);
  CHECK(json::parse(structured->body) == debrief);

  // The closed stream replays everything and ends.
  auto all = svc.client.Get("/sessions/" + id + "/feedback");
  REQUIRE(all);
  CHECK(sse_records(all->body).size() == 5);
  CHECK(sse_records(all->body, "end").size() == 1);

  auto late = svc.client.Post("/sessions/" + id + "/events", R"({"kind":"HandsOnShoulders"})", "application/json");
  REQUIRE(late);
  CHECK(late->status == 409);

  CHECK(fs::exists(tmp.path / "logs" / (id + ".jsonl")));
  CHECK(fs::exists(tmp.path / "logs" / (id + ".jsonl.trace")));
  CHECK(std::distance(fs::directory_iterator(tmp.path / "history"), fs::directory_iterator{}) == 1);
}

TEST_CASE("errors map to HTTP statuses") {
  RunningService svc(ServiceOptions{});
  auto missing = svc.client.Post("/sessions/live-999999/events", R"({"kind":"GlassDisposed"})", "application/json");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(json::parse(missing->body).contains("message"));

  auto report = svc.client.Get("/sessions/nope/report");
  REQUIRE(report);
  CHECK(report->status == 404);

  auto bad_mode = svc.client.Post("/sessions", R"({"mode":"exam"})", "application/json");
  REQUIRE(bad_mode);
  CHECK(bad_mode->status == 400);

  auto bad_json = svc.client.Post("/sessions", "{not json", "application/json");
  REQUIRE(bad_json);
  CHECK(bad_json->status == 400);

  const json created = svc.post("/sessions", {{"mode", "training"}}, 201);
  CHECK(created.at("feedback").empty());
  auto bad_kind = svc.client.Post("/sessions/" + created.at("session_id").get<std::string>() + "/events",
                                  R"({"kind":"Dance"})", "application/json");
  REQUIRE(bad_kind);
  CHECK(bad_kind->status == 400);
}

TEST_CASE("live compressions reach the engine through the device") {
  RunningService svc(ServiceOptions{});
  const json created = svc.post("/sessions", {{"mode", "training"}}, 201);
  const std::string id = created.at("session_id");
  std::this_thread::sleep_for(std::chrono::milliseconds(1200));  // calibration at rest
  for (int i = 0; i < 4; ++i) {
    svc.post("/sessions/" + id + "/compressions", {{"depth_cm", 5.5}, {"duration_ms", 250}}, 200);
    std::this_thread::sleep_for(std::chrono::milliseconds(570));
  }
  const json debrief = svc.post("/sessions/" + id + "/finish", {{"abort", true}}, 200);
  CHECK(debrief.at("cpr").at("push_count") == 4);
  CHECK(debrief.at("cpr").at("avg_depth_cm").get<double>() == doctest::Approx(5.5).epsilon(0.05));
}
