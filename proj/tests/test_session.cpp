#include <fstream>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "lsti/error.hpp"
#include "lsti/json_io.hpp"
#include "lsti/service.hpp"
#include "test_support.hpp"

using namespace lsti;
using nlohmann::json;

namespace {

const WorldConfig& config() {
  static const WorldConfig c = default_world_config();
  return c;
}

/// Tiny trained agents written once to a manifest shared by the tests.
const std::filesystem::path& manifest_path() {
  static lsti::test::TempDir dir;
  static const std::filesystem::path path = [] {
    const auto data = lsti::test::small_log();
    const auto agents = lsti::test::tiny_agents(data);
    Manifest m;
    save_agents(dir.path(), "base", agents, intention_set_of(data).texts(), m);
    m.save(dir.path() / "manifest.json");
    return dir.path() / "manifest.json";
  }();
  return path;
}

json action(const std::string& a, const std::string& o, const std::string& room,
            const std::string& intention, int duration) {
  return {{"action", a}, {"object", o}, {"room", room}, {"intention", intention}, {"duration", duration}};
}

json routine_step(int i) {
  switch (i % 4) {
    case 0: return action("cook", "stove", "kitchen", "make breakfast", 20);
    case 1: return action("eat", "bread", "kitchen", "make breakfast", 15);
    case 2: return action("watch", "tv", "living room", "watch tv", 60);
    default: return action("sleep", "bed", "bedroom", "go to sleep", 480);
  }
}

std::size_t line_count(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

}  // namespace

TEST_CASE("a new session starts from init_world") {
  lsti::test::TempDir dir;
  SessionStore store(dir.path(), config(), nullptr);
  const auto s = store.create({{"start_minute", 360}});
  CHECK(s["v"] == 1);
  CHECK(s["events"] == 0);
  json expected;
  to_json(expected, init_world(config(), make_instant(kDefaultStartDate, 360)));
  CHECK(s["state"] == expected);
  const std::string id = s["session"]["id"];
  CHECK(std::filesystem::exists(dir.path() / (id + ".jsonl")));
  CHECK(store.predictions(id)["available"] == false);
  CHECK(store.conflicts(id)["conflicts"].empty());

  CHECK_THROWS_AS(store.create({{"id", id}}), FormatError);
  CHECK_THROWS_AS(store.create({{"id", "../escape"}}), FormatError);
  CHECK_THROWS_AS(store.create({{"days", 0}}), FormatError);
  CHECK_THROWS_AS(store.state("nope"), NotFoundError);
}

TEST_CASE("posting advances state and logical time") {
  lsti::test::TempDir dir;
  SessionStore store(dir.path(), config(), nullptr);
  const std::string id = store.create({{"id", "alpha"}, {"start_minute", 420}})["session"]["id"];
  const auto r = store.post_action(id, routine_step(0));
  CHECK(r["events"] == 1);
  CHECK(r["event"]["start_time"] == 420);
  const auto st = store.state(id);
  CHECK(st["state"]["clock"]["minute"] == 440);
  CHECK(st["state"]["participant_room"] == "kitchen");
  CHECK(store.post_action(id, routine_step(1))["event"]["start_time"] == 440);
  CHECK(st["window"].size() == 1);
}

TEST_CASE("invalid actions are rejected with rule ids and leave no trace") {
  lsti::test::TempDir dir;
  SessionStore store(dir.path(), config(), nullptr);
  const std::string id = store.create({})["session"]["id"];
  store.post_action(id, routine_step(0));
  const auto before = store.state(id);
  const auto file = dir.path() / (id + ".jsonl");
  const auto lines = line_count(file);

  const auto rule_of = [&](const json& body) {
    try {
      store.post_action(id, body);
    } catch (const ValidationError& e) {
      return e.rule();
    }
    return std::string("none");
  };
  CHECK(rule_of(action("fly", "stove", "kitchen", "x", 5)) == "unknown-action");
  CHECK(rule_of(action("cook", "rocket", "kitchen", "x", 5)) == "unknown-object");
  CHECK(rule_of(action("cook", "stove", "garage", "x", 5)) == "unknown-room");
  CHECK(rule_of(action("cook", "stove", "kitchen", "x", -5)) == "negative-duration");
  auto bad_state = action("turn_on", "tv", "living room", "x", 1);
  bad_state["post_state"] = "melted";
  CHECK(rule_of(bad_state) == "state-not-in-schema");

  CHECK_THROWS_AS(store.post_action(id, json{{"action", "cook"}}), FormatError);
  CHECK_THROWS_AS(store.post_action(id, json::array()), FormatError);
  auto bad_duration = routine_step(0);
  bad_duration["duration"] = "ten";
  CHECK_THROWS_AS(store.post_action(id, bad_duration), FormatError);
  CHECK_THROWS_AS(store.post_action(id, action("cook", "stove", "kitchen", "  ", 5)), FormatError);
  CHECK_THROWS_AS(store.post_action("ghost", routine_step(0)), NotFoundError);

  CHECK(store.state(id) == before);
  CHECK(line_count(file) == lines);

  auto explicit_state = action("turn_on", "tv", "living room", "watch tv", 1);
  explicit_state["post_state"] = "on";
  CHECK_NOTHROW(store.post_action(id, explicit_state));
}

TEST_CASE("resume after a kill reconstructs the snapshot") {
  for (const int n : {1, 5, 50}) {
    lsti::test::TempDir dir;
    json snapshot, predictions, conflicts;
    std::string id;
    {
      auto registry = std::make_shared<ModelRegistry>(manifest_path());
      SessionStore store(dir.path(), config(), registry);
      id = store.create({})["session"]["id"];
      for (int i = 0; i < n; ++i) store.post_action(id, routine_step(i));
      snapshot = store.state(id);
      predictions = store.predictions(id);
      conflicts = store.conflicts(id);
    }
    auto registry = std::make_shared<ModelRegistry>(manifest_path());
    SessionStore store(dir.path(), config(), registry);
    CHECK_THROWS_AS(store.state(id), NotFoundError);
    CHECK(store.resume(id) == snapshot);
    CHECK(store.state(id) == snapshot);
    CHECK(store.predictions(id) == predictions);
    CHECK(store.conflicts(id) == conflicts);
    CHECK(snapshot["events"] == n);
    CHECK(snapshot["window"].size() == static_cast<std::size_t>(std::min(n, kLongWindow - 1)));
    // Resuming a live session is idempotent.
    CHECK(store.resume(id) == snapshot);
  }
}

TEST_CASE("a torn trailing line is discarded on resume") {
  lsti::test::TempDir dir;
  json snapshot;
  std::string id;
  {
    SessionStore store(dir.path(), config(), nullptr);
    id = store.create({})["session"]["id"];
    for (int i = 0; i < 3; ++i) store.post_action(id, routine_step(i));
    snapshot = store.state(id);
  }
  const auto file = dir.path() / (id + ".jsonl");
  {
    std::ofstream out(file, std::ios::app);
    out << R"({"action":"eat","participant_id")";
  }
  SessionStore store(dir.path(), config(), nullptr);
  CHECK(store.resume(id) == snapshot);
  CHECK(read_file(file).back() == '\n');
  store.post_action(id, routine_step(3));
  CHECK(store.state(id)["events"] == 4);

  CHECK_THROWS_AS(store.resume("never-created"), NotFoundError);
  CHECK_THROWS_AS(store.state("never-created"), NotFoundError);
}

TEST_CASE("resume rejects a different world") {
  lsti::test::TempDir dir;
  std::string id;
  {
    SessionStore store(dir.path(), config(), nullptr);
    id = store.create({})["session"]["id"];
  }
  SessionStore other(dir.path(), default_world_config(206), nullptr);
  CHECK_THROWS_AS(other.resume(id), Error);
}

TEST_CASE("exported sessions validate clean") {
  lsti::test::TempDir dir;
  SessionStore store(dir.path(), config(), nullptr);
  const std::string id = store.create({{"participant", "P01"}})["session"]["id"];
  for (int i = 0; i < 10; ++i) store.post_action(id, routine_step(i));
  const auto log = store.export_log(id);
  CHECK(log.events.size() == 10);
  CHECK(log.participant_id == "P01");
  CHECK(validate_log(log, config()).empty());
  CHECK(replay(log, config()) == [&] {
    WorldState s;
    from_json(store.state(id)["state"], s);
    return s;
  }());
}

TEST_CASE("predictions and conflicts with loaded agents") {
  lsti::test::TempDir dir;
  auto registry = std::make_shared<ModelRegistry>(manifest_path());
  SessionStore store(dir.path(), config(), registry);
  const std::string id = store.create({})["session"]["id"];

  const auto empty = store.predictions(id);
  CHECK(empty["available"] == true);
  CHECK(empty["next_actions"].size() == 5);
  CHECK(empty["long_list"].size() == 5);
  CHECK_FALSE(empty.contains("short_intention"));

  store.post_action(id, routine_step(0));
  const auto p = store.predictions(id);
  CHECK(p["events"] == 1);
  CHECK(p.contains("short_intention"));
  CHECK(p["next_duration_min"].get<int>() >= 0);
  double previous = 2.0;
  for (const auto& e : p["long_list"]) {
    CHECK(e["similarity"].get<double>() <= previous);
    previous = e["similarity"];
  }

  const std::string odd = "juggle flaming torches";
  const auto set = registry->get("base")->intentions;
  for (const auto& e : set.embeddings()) REQUIRE(cosine(embed_intention(odd), e) < 0.7);
  const auto r = store.post_action(id, action("play", "game_console", "living room", odd, 30));
  const auto c = r["conflicts"];
  REQUIRE(c["conflicts"].size() >= 1);
  const auto last = c["conflicts"].back();
  CHECK(last["r_conf"] == 1);
  CHECK(last["event_index"] == 1);
  CHECK(last["long_list"].size() == 5);
  const std::string top = last["long_list"][0]["text"];
  CHECK(last["query_text"] == "You planned to " + top + "; you appear to be " + odd +
                                  ". Should I help you switch?");
  CHECK(store.conflicts(id)["latest"]["r_conf"] == 1);
}

TEST_CASE("mutations on one session are serialized") {
  lsti::test::TempDir dir;
  SessionStore store(dir.path(), config(), nullptr);
  const std::string id = store.create({})["session"]["id"];
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&store, &id, t] {
      for (int i = 0; i < 10; ++i) {
        store.post_action(id, routine_step(t + i));
        (void)store.state(id);
      }
    });
  }
  for (auto& th : threads) th.join();
  const auto live = store.state(id);
  CHECK(live["events"] == 40);
  CHECK(validate_log(store.export_log(id), config()).empty());
  SessionStore fresh(dir.path(), config(), nullptr);
  CHECK(fresh.resume(id) == live);
}

TEST_CASE("http endpoints") {
  lsti::test::TempDir dir;
  auto registry = std::make_shared<ModelRegistry>(manifest_path());
  SessionStore store(dir.path(), config(), registry);
  HttpService service(store);
  const int port = service.bind("127.0.0.1", 0);
  std::thread server([&service] { service.listen(); });
  httplib::Client client("127.0.0.1", port);
  for (int i = 0; i < 200 && !client.Get("/config"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));

  const auto cfg = client.Get("/config");
  REQUIRE(cfg);
  CHECK(cfg->status == 200);
  CHECK(json::parse(cfg->body)["fingerprint"] == config().fingerprint());

  const auto created = client.Post("/sessions", R"({"id":"web1"})", "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  CHECK(json::parse(created->body)["v"] == 1);

  const auto posted = client.Post("/sessions/web1/actions", routine_step(0).dump(), "application/json");
  REQUIRE(posted);
  CHECK(posted->status == 200);
  CHECK(json::parse(posted->body)["events"] == 1);

  const auto invalid = client.Post("/sessions/web1/actions",
                                   action("fly", "stove", "kitchen", "x", 5).dump(), "application/json");
  REQUIRE(invalid);
  CHECK(invalid->status == 422);
  const auto err = json::parse(invalid->body);
  CHECK(err["v"] == 1);
  CHECK(err["error"]["rule"] == "unknown-action");

  const auto malformed = client.Post("/sessions/web1/actions", "{not json", "application/json");
  REQUIRE(malformed);
  CHECK(malformed->status == 400);
  CHECK(json::parse(malformed->body)["error"]["kind"] == "request");

  const auto missing = client.Get("/sessions/nobody/state");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(json::parse(missing->body)["error"]["kind"] == "not-found");

  const auto no_route = client.Get("/nowhere");
  REQUIRE(no_route);
  CHECK(no_route->status == 404);
  CHECK(json::parse(no_route->body)["v"] == 1);

  for (const auto* path : {"/sessions/web1/state", "/sessions/web1/predictions",
                           "/sessions/web1/conflicts", "/sessions/web1/export"}) {
    const auto r = client.Get(path);
    REQUIRE(r);
    CHECK_MESSAGE(r->status == 200, path);
    CHECK(json::parse(r->body)["v"] == 1);
  }
  const auto exported = json::parse(client.Get("/sessions/web1/export")->body);
  ObservationLog log;
  from_json(exported["log"], log);
  CHECK(validate_log(log, config()).empty());

  const auto state = client.Get("/sessions/web1/state");
  const auto resumed = client.Post("/sessions/web1/resume", "", "application/json");
  REQUIRE(resumed);
  CHECK(resumed->status == 200);
  CHECK(json::parse(resumed->body) == json::parse(state->body));

  service.stop();
  server.join();
}
