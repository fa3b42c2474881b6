#include <random>

#include "doctest.h"
#include "lsti/error.hpp"
#include "lsti/json_io.hpp"
#include "lsti/world.hpp"

using namespace lsti;

namespace {

Observation make_obs(const std::string& action, const std::string& object, int start_min,
                     int duration, const std::string& room = "kitchen", ObjectState post = {}) {
  Observation o;
  o.participant_id = "T";
  o.action = action;
  o.object_id = object;
  o.start_date = Date{2024, 1, 1};
  o.start_time = start_min;
  o.duration_min = duration;
  o.room = room;
  o.post_state = post;
  o.intention = "test";
  return o;
}

ObservationLog clean_log(const WorldConfig& cfg) {
  ObservationLog log;
  log.participant_id = "T";
  log.config_fingerprint = cfg.fingerprint();
  log.start_date = Date{2024, 1, 1};
  log.days = 1;
  log.events = {make_obs("turn_on", "stove", 480, 5, "kitchen", {1, 0}),
                make_obs("cook", "pan", 485, 30, "kitchen", {1, 0}),
                make_obs("turn_off", "stove", 515, 1, "kitchen", {0, 0}),
                make_obs("sleep", "none", 600, 60, "bedroom")};
  return log;
}

}  // namespace

TEST_CASE("calendar round trip and weekday") {
  const Date d{2024, 1, 3};
  CHECK(d.weekday() == 2);  // Wednesday
  CHECK(Date::from_days(d.to_days()) == d);
  CHECK(Date::parse("2024-02-29") == Date{2024, 2, 29});
  CHECK_THROWS_AS(Date::parse("2023-02-29"), FormatError);
  CHECK(instant_minute(make_instant(d, 1439) + 1) == 0);
  CHECK(instant_date(make_instant(d, 1439) + 1) == Date{2024, 1, 4});
}

TEST_CASE("default config is valid with the fixed vocabularies") {
  const auto cfg = default_world_config();
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.rooms.size() == 6);
  CHECK(cfg.actions.size() == 26);
  CHECK(cfg.objects.size() == 40);
  CHECK(cfg.object_index("none") == 0);
  CHECK(cfg.object_index("stove") == 1);
  CHECK(default_world_config(206).objects.size() == 206);
  CHECK_NOTHROW(default_world_config(206).validate());
}

TEST_CASE("init_world") {
  auto cfg = default_world_config();
  SUBCASE("initial states are copied") {
    const auto state = init_world(cfg, 100);
    CHECK(state.object_states.size() == 40);
    CHECK(state.object_states.at("stove").state == 0);  // "off"
    CHECK(state.participant_room == "hall");
    CHECK(state.clock == 100);
    CHECK(state.object_states.at("apple").quantity == 6);
  }
  SUBCASE("five rooms is a configuration error") {
    cfg.rooms.pop_back();
    CHECK_THROWS_WITH_AS(init_world(cfg), doctest::Contains("expected 6 rooms"), ConfigError);
  }
  SUBCASE("duplicate object id names the entry") {
    cfg.objects.push_back(cfg.objects.front());
    CHECK_THROWS_WITH_AS(init_world(cfg), doctest::Contains("stove"), ConfigError);
  }
  SUBCASE("bad schema reference") {
    cfg.objects[3].schema = "nope";
    CHECK_THROWS_AS(init_world(cfg), ConfigError);
  }
  SUBCASE("initial state outside schema") {
    cfg.objects[0].initial_state = "burning";
    CHECK_THROWS_AS(init_world(cfg), ConfigError);
  }
}

TEST_CASE("apply_action") {
  const auto cfg = default_world_config();
  const Instant t0 = make_instant(Date{2024, 1, 1}, 0);
  const auto s0 = init_world(cfg, t0);

  SUBCASE("turn_on stove") {
    const auto obs = make_obs("turn_on", "stove", 480, 5, "kitchen", {1, 0});
    const auto s1 = apply_action(s0, obs, cfg);
    CHECK(s1.object_states.at("stove").state == 1);
    CHECK(s1.clock == obs.start() + 5);
    CHECK(s1.participant_room == "kitchen");
    auto unchanged = s1;
    unchanged.object_states["stove"] = s0.object_states.at("stove");
    unchanged.clock = s0.clock;
    unchanged.participant_room = s0.participant_room;
    CHECK(unchanged == s0);
  }
  SUBCASE("eat decrements through default effect") {
    auto s = s0;
    s.object_states["apple"].quantity = 1;
    const auto post = default_effect(cfg, s, "eat", "apple");
    CHECK(post.quantity == 0);
    CHECK(cfg.schema_of("apple")[static_cast<std::size_t>(post.state)] == "depleted");
    const auto s1 = apply_action(s, make_obs("eat", "apple", 60, 5, "kitchen", post), cfg);
    CHECK(s1.object_states.at("apple").quantity == 0);
  }
  SUBCASE("time regression") {
    const auto s1 = apply_action(s0, make_obs("turn_on", "stove", 480, 5, "kitchen", {1, 0}), cfg);
    CHECK_THROWS_AS(apply_action(s1, make_obs("turn_off", "stove", 470, 1), cfg), OrderingError);
  }
  SUBCASE("unknown vocabulary") {
    try {
      apply_action(s0, make_obs("flyy", "stove", 10, 1), cfg);
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(e.rule() == "unknown-action");
    }
    CHECK_THROWS_AS(apply_action(s0, make_obs("grab", "unicorn", 10, 1), cfg), ValidationError);
    CHECK_THROWS_AS(apply_action(s0, make_obs("grab", "cup", 10, 1, "garage"), cfg),
                    ValidationError);
  }
  SUBCASE("purity") {
    const auto obs = make_obs("open", "fridge", 30, 2, "kitchen", {1, 0});
    CHECK(apply_action(s0, obs, cfg) == apply_action(s0, obs, cfg));
  }
}

TEST_CASE("validate_log") {
  const auto cfg = default_world_config();
  auto log = clean_log(cfg);
  CHECK(validate_log(log, cfg).empty());

  SUBCASE("negative duration") {
    log.events[1].duration_min = -5;
    const auto v = validate_log(log, cfg);
    REQUIRE(v.size() == 1);
    CHECK(v[0] == Violation{1, "negative-duration", v[0].detail});
  }
  SUBCASE("overlap is reported at the later index") {
    log.events[2].start_time = 505;  // cook ends at 515
    const auto v = validate_log(log, cfg);
    REQUIRE(v.size() == 1);
    CHECK(v[0].index == 2);
    CHECK(v[0].rule == "overlap");
  }
  SUBCASE("state outside schema and regression") {
    log.events[0].post_state.state = 5;
    log.events[3].start_time = 100;
    const auto v = validate_log(log, cfg);
    REQUIRE(v.size() == 2);
    CHECK(v[0].rule == "state-not-in-schema");
    CHECK(v[1].rule == "time-regression");
  }
}

TEST_CASE("sanitize_log") {
  const auto cfg = default_world_config();
  const auto clean = clean_log(cfg);

  SUBCASE("clean log is untouched") {
    const auto [out, report] = sanitize_log(clean, cfg);
    CHECK(out == clean);
    CHECK(report.empty());
  }
  SUBCASE("overlap shifts the later start") {
    auto log = clean;
    log.events[2].start_time = 505;
    const auto [out, report] = sanitize_log(log, cfg);
    REQUIRE(report.actions.size() == 1);
    CHECK(report.actions[0].fix == "shift");
    CHECK(out.events[2].start_time == 515);
  }
  SUBCASE("unknown action is dropped") {
    auto log = clean;
    log.events[1].action = "flyy";
    const auto [out, report] = sanitize_log(log, cfg);
    REQUIRE(report.actions.size() == 1);
    CHECK(report.actions[0].fix == "drop");
    CHECK(report.actions[0].rule == "unknown-action");
    CHECK(out.events.size() == 3);
  }
  SUBCASE("state is clamped") {
    auto log = clean;
    log.events[0].post_state = {9, -2};
    const auto [out, report] = sanitize_log(log, cfg);
    CHECK(out.events[0].post_state == ObjectState{1, 0});
    CHECK(report.actions.at(0).fix == "clamp");
  }
}

TEST_CASE("sanitize is idempotent and always validates (random corruption)") {
  const auto cfg = default_world_config();
  std::mt19937_64 rng(7);
  const std::vector<std::string> actions = {"grab", "cook", "flyy", "sleep", "open"};
  const std::vector<std::string> objects = {"stove", "cup", "none", "unicorn", "fridge"};
  for (int trial = 0; trial < 200; ++trial) {
    ObservationLog log;
    log.start_date = Date{2024, 1, 1};
    log.config_fingerprint = cfg.fingerprint();
    std::uniform_int_distribution<int> pick(0, 4);
    std::uniform_int_distribution<int> start(0, 3000);
    std::uniform_int_distribution<int> dur(-10, 120);
    std::uniform_int_distribution<int> st(-1, 9);
    for (int i = 0; i < 20; ++i) {
      auto o = make_obs(actions[static_cast<std::size_t>(pick(rng))],
                        objects[static_cast<std::size_t>(pick(rng))], 0, dur(rng));
      o.set_start(log.horizon_start() + start(rng));
      o.post_state = {st(rng), st(rng)};
      log.events.push_back(o);
    }
    const auto once = sanitize_log(log, cfg).first;
    CHECK(validate_log(once, cfg).empty());
    const auto twice = sanitize_log(once, cfg);
    CHECK(twice.first == once);
    CHECK(twice.second.empty());
    // Replay of any valid log succeeds and ends at last start + duration.
    if (!once.events.empty()) {
      const auto state = replay(once, cfg);
      CHECK(state.clock == once.events.back().end());
    }
  }
}

TEST_CASE("log JSON and JSON Lines forms agree") {
  const auto cfg = default_world_config();
  const auto log = clean_log(cfg);
  CHECK(log_from_jsonl(log_to_jsonl(log)) == log);
  CHECK(nlohmann::json(log).get<ObservationLog>() == log);
  CHECK(nlohmann::json(cfg).get<WorldConfig>() == cfg);
  const nlohmann::json ev = log.events[0];
  CHECK(ev["weekday"] == 0);
}
