#include <cmath>
#include <random>

#include "doctest.h"
#include "lsti/conflict.hpp"
#include "lsti/error.hpp"
#include "test_support.hpp"

using namespace lsti;

namespace {

Embedding basis(std::size_t i, double scale = 1.0) {
  Embedding e{};
  e[i] = scale;
  return e;
}

LongCandidate candidate(const std::string& text) { return {text, embed_intention(text), 0.0}; }

Embedding random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Embedding e{};
  for (double& x : e) x = n(rng);
  return normalized(e);
}

}  // namespace

TEST_CASE("distance") {
  CHECK(distance(basis(0), basis(0)) == 0.0);
  CHECK(distance(basis(0), basis(1)) == doctest::Approx(1.0));
  CHECK(distance(basis(0), basis(0, -1.0)) == doctest::Approx(2.0));
  CHECK_THROWS_AS(distance(Embedding{}, basis(0)), Error);
  CHECK_THROWS_AS(distance(basis(0), Embedding{}), Error);

  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto a = random_unit(rng);
    const auto b = random_unit(rng);
    CHECK(distance(a, b) == doctest::Approx(distance(b, a)).epsilon(1e-15));
    CHECK(distance(a, a) == doctest::Approx(0.0).epsilon(1e-12));
    Embedding scaled = a;
    for (double& x : scaled) x *= 7.5;
    CHECK(distance(scaled, b) == doctest::Approx(distance(a, b)).epsilon(1e-12));
    CHECK(distance(a, b) >= 0.0);
    CHECK(distance(a, b) <= 2.0);
  }
}

TEST_CASE("detect branches") {
  const auto same = detect(embed_intention("make breakfast"), "make breakfast",
                           {candidate("go to work"), candidate("make breakfast")}, 0.3, 10);
  CHECK(same.r_conf == 0);
  CHECK(same.min_distance == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(same.query_text.empty());
  CHECK(same.t_k == 10);
  CHECK(same.long_list.size() == 2);

  const auto orth = detect(basis(0), "watch tv", {{"go to work", basis(1), 0.9}}, 0.3, 0);
  CHECK(orth.r_conf == 1);
  CHECK(orth.min_distance == doctest::Approx(1.0));
  CHECK(orth.query_text ==
        "You planned to go to work; you appear to be watch tv. Should I help you switch?");

  const auto a = embed_intention("watch tv");
  const auto b = embed_intention("go to work and study");
  const double d = distance(a, b);
  CHECK(detect(a, "watch tv", {{"x", b, 0}}, d, 0).r_conf == 0);
  CHECK(detect(a, "watch tv", {{"x", b, 0}}, d - 1e-9, 0).r_conf == 1);
  CHECK(conflict_decision(0.3, 0.3) == 0);
  CHECK(conflict_decision(0.3 + 1e-9, 0.3) == 1);

  CHECK_THROWS_AS(detect(a, "watch tv", {}, 0.3, 0), Error);
  CHECK_THROWS_AS(detect(a, "watch tv", {{"x", b, 0}}, -0.1, 0), Error);
  CHECK_THROWS_AS(detect(a, "watch tv", {{"x", b, 0}}, 2.1, 0), Error);
}

TEST_CASE("detect is monotone in delta and ignores list order") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = random_unit(rng);
    std::vector<LongCandidate> list;
    for (int i = 0; i < 5; ++i) list.push_back({"c" + std::to_string(i), random_unit(rng), 0});
    int previous = 1;
    for (int i = 0; i < 100; ++i) {
      const double delta = 2.0 * i / 99.0;
      const int r = detect(s, "s", list, delta, 0).r_conf;
      CHECK(r <= previous);
      previous = r;
    }
    auto reversed = list;
    std::reverse(reversed.begin(), reversed.end());
    const auto r1 = detect(s, "s", list, 0.9, 0);
    const auto r2 = detect(s, "s", reversed, 0.9, 0);
    CHECK(r1.r_conf == r2.r_conf);
    CHECK(r1.min_distance == r2.min_distance);
  }
}

TEST_CASE("overrun gate") {
  CHECK(overrun_gate_open(100, 30, std::nullopt));
  CHECK(overrun_gate_open(100, 30, 120));
  CHECK_FALSE(overrun_gate_open(100, 20, 120));
  CHECK_FALSE(overrun_gate_open(100, 10, 120));
}

TEST_CASE("evaluate_detector") {
  ConflictGroundTruth gt;
  for (int i = 0; i < 6; ++i) gt.labels.push_back({static_cast<std::size_t>(i), "a", "a", i % 3 == 0});
  std::vector<ConflictReport> perfect, always;
  for (std::size_t i = 0; i < 6; ++i) {
    ConflictReport r;
    r.event_index = i;
    r.r_conf = gt.labels[i].is_conflict ? 1 : 0;
    perfect.push_back(r);
    r.r_conf = 1;
    always.push_back(r);
  }
  const auto p = evaluate_detector(perfect, gt);
  CHECK(p.recall == 1.0);
  CHECK(p.false_positive_rate == 0.0);
  CHECK(p.precision == 1.0);
  CHECK(p.tp == 2);
  CHECK(p.tn == 4);
  const auto a = evaluate_detector(always, gt);
  CHECK(a.recall == 1.0);
  CHECK(a.false_positive_rate == 1.0);
  CHECK(a.precision == doctest::Approx(2.0 / 6.0));

  auto dup = perfect;
  dup.push_back(perfect.front());
  CHECK_THROWS_AS(evaluate_detector(dup, gt), Error);
  auto outside = perfect;
  outside.back().event_index = 6;
  CHECK_THROWS_AS(evaluate_detector(outside, gt), Error);
  CHECK(evaluate_detector({}, gt).recall == 0.0);
}

TEST_CASE("oracle detection on injected fixtures") {
  const auto cfg = default_world_config();
  for (const auto& p : standard_personas()) {
    const auto data = simulate_participant(p, cfg, 28, 42);
    REQUIRE(data.gt.conflict_count() > 0);
    const auto reports = detect_oracle(data.log, data.gt);
    const auto s = evaluate_detector(reports, data.gt);
    CHECK_MESSAGE(s.recall == 1.0, p.id);
    CHECK_MESSAGE(s.false_positive_rate == 0.0, p.id);
  }
  const auto data = lsti::test::small_log();
  auto short_gt = data.gt;
  short_gt.labels.pop_back();
  CHECK_THROWS_AS(detect_oracle(data.log, short_gt), Error);
}
