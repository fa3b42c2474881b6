#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "lsti/encoding.hpp"
#include "lsti/error.hpp"
#include "lsti/persona.hpp"

using namespace lsti;

TEST_CASE("binary_code") {
  CHECK(binary_code(5, 5) == std::vector<double>{0, 0, 1, 0, 1});
  CHECK(binary_code(0, 5) == std::vector<double>{0, 0, 0, 0, 0});
  CHECK(binary_code(26, 5) == std::vector<double>{1, 1, 0, 1, 0});
  CHECK_THROWS_AS(binary_code(32, 5), EncodingError);

  for (std::size_t width = 1; width <= 8; ++width) {
    for (std::size_t idx = 0; idx < (std::size_t{1} << width); ++idx) {
      const auto bits = binary_code(idx, width);
      std::size_t back = 0;
      for (double b : bits) back = back * 2 + static_cast<std::size_t>(b);
      CHECK(back == idx);
    }
  }
}

TEST_CASE("embed_intention") {
  CHECK(embed_intention("make breakfast") == embed_intention("make breakfast"));
  CHECK(embed_intention("Make Breakfast ") == embed_intention("make breakfast"));
  CHECK(embed_intention("  make   breakfast") == embed_intention("make breakfast"));
  CHECK(norm(embed_intention("")) == 0.0);
  CHECK(norm(embed_intention("   ")) == 0.0);

  // Golden values from an independent reference implementation of the
  // hashed-trigram embedder.
  CHECK(cosine(embed_intention("go to work"), embed_intention("watch TV")) ==
        doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cosine(embed_intention("go to work"), embed_intention("watch TV")) < 0.9);
  const auto e = embed_intention("make breakfast");
  CHECK(e[3] == doctest::Approx(-0.25));
  CHECK(e[15] == doctest::Approx(-0.25));
  CHECK(e[16] == doctest::Approx(0.5));
  CHECK(e[31] == doctest::Approx(0.25));
}

TEST_CASE("embedding norm property over random strings") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> len(1, 24);
  std::uniform_int_distribution<int> ch(32, 126);
  for (int i = 0; i < 2000; ++i) {
    std::string s(static_cast<std::size_t>(len(rng)), ' ');
    for (auto& c : s) c = static_cast<char>(ch(rng));
    const auto v = embed_intention(s);
    if (normalize_text(s).empty()) {
      CHECK(norm(v) == 0.0);
    } else {
      CHECK(std::abs(norm(v) - 1.0) < 1e-6);
      CHECK(std::abs(cosine(v, v) - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("fixture intentions are pairwise separated by the default threshold") {
  std::vector<std::string> texts{std::string(kFillerIntention)};
  for (const auto& p : standard_personas()) {
    for (const auto& t : p.intentions()) texts.push_back(t);
  }
  for (std::size_t i = 0; i < texts.size(); ++i) {
    for (std::size_t j = 0; j < texts.size(); ++j) {
      if (texts[i] == texts[j]) continue;
      CHECK(cosine(embed_intention(texts[i]), embed_intention(texts[j])) < 0.7);
    }
  }
}

TEST_CASE("encode_observation layout") {
  const auto cfg = default_world_config();
  const auto layout = FeatureLayout::for_config(cfg);
  CHECK(layout.object_bits == 6);  // ceil(log2(41))
  CHECK(layout.base_width == 2 + 7 + 5 + 6 + 3 + 1 + 8);

  Observation o;
  o.action = "cook";
  o.object_id = "stove";
  o.room = "kitchen";
  o.start_date = Date{2024, 1, 3};  // Wednesday
  o.start_time = 7 * 60 + 30;
  o.duration_min = 600;
  o.post_state = {1, 0};
  o.intention = "make dinner";
  const Horizon horizon{Date{2024, 1, 1}, 28};
  const auto v = encode_observation(o, cfg, horizon, false);
  REQUIRE(v.size() == layout.base_width);
  CHECK(v[0] == 0.3125);
  CHECK(v[1] == doctest::Approx(2.0 / 28.0));
  CHECK(std::vector<double>(v.begin() + 2, v.begin() + 9) ==
        std::vector<double>{0, 0, 1, 0, 0, 0, 0});
  CHECK(v[layout.duration] == 1.0);
  CHECK(std::vector<double>(v.begin() + 9, v.begin() + 14) == binary_code(13, 5));
  CHECK(v[layout.post_state + 1] == 1.0);

  const auto with = encode_observation(o, cfg, horizon, true);
  REQUIRE(with.size() == layout.base_width + 64);
  const auto e = embed_intention("make dinner");
  CHECK(std::equal(e.begin(), e.end(), with.begin() + static_cast<std::ptrdiff_t>(layout.intention)));

  o.object_id = "unicorn";
  CHECK_THROWS_AS(encode_observation(o, cfg, horizon, false), EncodingError);
}

TEST_CASE("encoded features respect their ranges on a generated log") {
  const auto cfg = default_world_config();
  const auto log = generate_log(standard_personas()[0], cfg, 7, 3);
  const FeatureEncoder enc(cfg);
  const auto& l = enc.layout();
  const Matrix m = enc.encode_log(log, true);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const auto row = m.row(r);
    for (std::size_t c = 0; c < l.base_width; ++c) {
      CHECK(row[c] >= 0.0);
      CHECK(row[c] <= 1.0);
    }
    CHECK(std::accumulate(row.begin() + 2, row.begin() + 9, 0.0) == 1.0);
    CHECK(std::accumulate(row.begin() + static_cast<std::ptrdiff_t>(l.post_state),
                          row.begin() + static_cast<std::ptrdiff_t>(l.post_state + 8), 0.0) == 1.0);
    for (std::size_t c = l.intention; c < m.cols; ++c) {
      CHECK(std::abs(row[c]) <= 1.0);
    }
  }
}

TEST_CASE("build_sequences") {
  const auto cfg = default_world_config();
  auto log = generate_log(standard_personas()[0], cfg, 2, 1);
  log.events.resize(20);
  CHECK(build_sequences(log, cfg, 16, false).size() == 5);

  log.events.resize(16);
  const auto one = build_sequences(log, cfg, 16, false);
  REQUIRE(one.size() == 1);
  CHECK(one[0].target_index == 15);
  CHECK(one[0].input.rows == 15);

  log.events.resize(3);
  const auto two = build_sequences(log, cfg, 2, false);
  REQUIRE(two.size() == 2);
  CHECK(two[0].target_index == 1);
  CHECK(two[1].target_index == 2);
  CHECK(two[1].intention == log.events[2].intention);

  CHECK_THROWS(build_sequences(log, cfg, 16, false));
}
