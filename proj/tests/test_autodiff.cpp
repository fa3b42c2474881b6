#include <cmath>
#include <cstring>
#include <random>

#include "doctest.h"
#include "lsti/error.hpp"
#include "lsti/nn.hpp"

using namespace lsti;

namespace {

Parameter& random_param(ParameterSet& ps, const std::string& name, std::size_t r, std::size_t c,
                        std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  auto& p = ps.add(name, r, c);
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& x : p.value.data) x = u(rng);
  return p;
}

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  Matrix m(r, c);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& x : m.data) x = u(rng);
  return m;
}

/// Random linear functional of `v`, so every output entry gets a distinct
/// upstream gradient.
Var project(Tape& t, Var v, const Matrix& weights) {
  return sum_all(mul(v, t.constant(weights)));
}

Matrix identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

constexpr double kTol = 1e-4;
// Reference value from an independent run of the same Adam recurrence.
constexpr double kAdamToyReference = -5.302973870570859e-05;

}  // namespace

TEST_CASE("forward examples") {
  Tape t;
  SUBCASE("softmax of zeros is uniform") {
    const auto y = softmax_rows(t.constant(Matrix(1, 2))).value();
    CHECK(y.data == std::vector<double>{0.5, 0.5});
  }
  SUBCASE("layer_norm of a constant row is zero before the affine part") {
    Matrix gamma(1, 4, 1.0);
    const auto y = layer_norm(t.constant(Matrix(2, 4, 7.5)), t.constant(gamma),
                              t.constant(Matrix(1, 4)))
                       .value();
    for (double v : y.data) CHECK(v == 0.0);
  }
  SUBCASE("identity matmul") {
    std::mt19937_64 rng(1);
    const Matrix a = random_matrix(3, 5, rng);
    CHECK(matmul(t.constant(identity(3)), t.constant(a)).value() == a);
  }
  SUBCASE("shape mismatch names both shapes") {
    CHECK_THROWS_WITH_AS(matmul(t.constant(Matrix(2, 3)), t.constant(Matrix(2, 3))),
                         doctest::Contains("(2x3) vs (2x3)"), DimensionError);
    CHECK_THROWS_AS(add(t.constant(Matrix(2, 3)), t.constant(Matrix(3, 2))), DimensionError);
  }
  SUBCASE("softmax rows sum to one") {
    std::mt19937_64 rng(2);
    Matrix m = random_matrix(6, 9, rng);
    for (double& x : m.data) x *= 1000.0;
    const auto y = softmax_rows(t.constant(m)).value();
    for (std::size_t r = 0; r < y.rows; ++r) {
      double s = 0.0;
      for (double v : y.row(r)) {
        CHECK(std::isfinite(v));
        s += v;
      }
      CHECK(std::abs(s - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("losses") {
  Tape t;
  std::mt19937_64 rng(3);
  const Matrix x = random_matrix(2, 5, rng);
  CHECK(mse(t.constant(x), x).value().data[0] == 0.0);

  Matrix v(1, 4);
  v.data = {0.5, 0.5, 0.5, 0.5};
  CHECK(std::abs(cosine_embedding_loss(t.constant(v), v).value().data[0]) < 1e-15);
  CHECK(std::isfinite(cosine_embedding_loss(t.constant(Matrix(1, 4)), v).value().data[0]));

  Matrix logits(1, 3);
  logits.data = {0.0, 60.0, 0.0};
  const std::size_t target = 1;
  CHECK(cross_entropy(t.constant(logits), std::span(&target, 1)).value().data[0] < 1e-20);
  CHECK(cross_entropy(t.constant(random_matrix(4, 3, rng)),
                      std::vector<std::size_t>{0, 1, 2, 0})
            .value()
            .data[0] >= 0.0);
}

TEST_CASE("every op matches central differences over 20 seeds") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    ParameterSet ps;
    auto& a = random_param(ps, "a", 3, 4, rng);
    auto& b = random_param(ps, "b", 4, 5, rng);
    auto& c = random_param(ps, "c", 3, 4, rng);
    auto& row = random_param(ps, "row", 1, 4, rng);
    auto& gamma = random_param(ps, "gamma", 1, 4, rng, 0.5, 1.5);
    auto& beta = random_param(ps, "beta", 1, 4, rng);
    auto& table = random_param(ps, "table", 6, 4, rng);
    const Matrix w35 = random_matrix(3, 5, rng);
    const Matrix w34 = random_matrix(3, 4, rng);
    const Matrix w33 = random_matrix(3, 3, rng);
    const Matrix w38 = random_matrix(3, 8, rng);
    const Matrix w64 = random_matrix(6, 4, rng);
    const Matrix target = random_matrix(3, 4, rng);
    const Matrix w32 = random_matrix(3, 2, rng);
    const Matrix w24 = random_matrix(2, 4, rng);
    const std::vector<std::size_t> idx{5, 0, 5};
    const std::vector<std::size_t> classes{1, 3, 0};

    const auto loss = [&](Tape& t) {
      const Var va = t.param(a), vb = t.param(b), vc = t.param(c), vr = t.param(row);
      std::vector<Var> terms;
      terms.push_back(project(t, matmul(va, vb), w35));
      terms.push_back(project(t, matmul_nt(va, vc), w33));
      terms.push_back(project(t, add(va, vr), w34));
      terms.push_back(project(t, sub(va, vc), w34));
      terms.push_back(project(t, mul(va, vc), w34));
      terms.push_back(project(t, scale(va, -2.5), w34));
      terms.push_back(project(t, relu(va), w34));
      terms.push_back(project(t, softmax_rows(va), w34));
      terms.push_back(project(t, layer_norm(va, t.param(gamma), t.param(beta)), w34));
      terms.push_back(project(t, embedding_lookup(t.param(table), idx), w34));
      const std::vector<Var> parts{va, vc};
      terms.push_back(project(t, concat_cols(parts), w38));
      terms.push_back(project(t, concat_rows(parts), w64));
      terms.push_back(project(t, slice_cols(va, 1, 2), w32));
      terms.push_back(project(t, slice_rows(va, 1, 2), w24));
      terms.push_back(cross_entropy(matmul(va, vb), classes));
      terms.push_back(mse(va, target));
      terms.push_back(cosine_embedding_loss(va, target));
      Var total = terms.front();
      for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
      return total;
    };
    const auto r = check_gradients(ps, loss);
    CAPTURE(seed);
    CAPTURE(r.worst_parameter);
    CHECK(r.max_rel_error < kTol);
    worst = std::max(worst, r.max_rel_error);
  }
  MESSAGE("worst op relative error: " << worst);
}

TEST_CASE("attention") {
  Tape t;
  std::mt19937_64 rng(5);
  SUBCASE("identical keys give uniform weights") {
    Matrix k(4, 8);
    for (std::size_t r = 0; r < 4; ++r) {
      for (std::size_t c = 0; c < 8; ++c) k(r, c) = 0.1 * static_cast<double>(c);
    }
    const Matrix v = random_matrix(4, 8, rng);
    const auto out = scaled_dot_product_attention(t.constant(random_matrix(2, 8, rng)),
                                                  t.constant(k), t.constant(v), 2)
                         .value();
    for (std::size_t c = 0; c < 8; ++c) {
      double mean = 0.0;
      for (std::size_t r = 0; r < 4; ++r) mean += v(r, c) / 4.0;
      CHECK(out(0, c) == doctest::Approx(mean).epsilon(1e-12));
      CHECK(out(1, c) == doctest::Approx(mean).epsilon(1e-12));
    }
  }
  SUBCASE("a single value row is returned for any query") {
    const Matrix v = random_matrix(1, 8, rng);
    const auto out = scaled_dot_product_attention(t.constant(random_matrix(3, 8, rng)),
                                                  t.constant(random_matrix(1, 8, rng)),
                                                  t.constant(v), 4)
                         .value();
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t c = 0; c < 8; ++c) CHECK(out(r, c) == doctest::Approx(v(0, c)));
    }
  }
  SUBCASE("indivisible heads") {
    CHECK_THROWS_AS(scaled_dot_product_attention(t.constant(Matrix(1, 6)), t.constant(Matrix(2, 6)),
                                                 t.constant(Matrix(2, 6)), 4),
                    DimensionError);
    ParameterSet ps;
    CHECK_THROWS_AS(MultiHeadAttention::make(ps, "m", 10, 4), DimensionError);
  }
  SUBCASE("gradients through projected multi-head attention") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      std::mt19937_64 r2(seed);
      ParameterSet ps;
      const auto mha = MultiHeadAttention::make(ps, "mha", 8, 2);
      glorot_init(ps, seed);
      auto& q = random_param(ps, "q_in", 2, 8, r2);
      auto& kv = random_param(ps, "kv_in", 5, 8, r2);
      const Matrix w = random_matrix(2, 8, r2);
      const auto res = check_gradients(ps, [&](Tape& tt) {
        return project(tt, mha(tt, tt.param(q), tt.param(kv)), w);
      });
      CAPTURE(seed);
      CAPTURE(res.worst_parameter);
      CHECK(res.max_rel_error < kTol);
    }
  }
}

TEST_CASE("encoder-decoder") {
  EncoderDecoderConfig cfg;
  cfg.input_dim = 7;
  cfg.query_dim = 9;
  cfg.d_model = 16;
  cfg.heads = 4;
  cfg.ffn = 32;

  SUBCASE("output shape") {
    ParameterSet ps;
    const EncoderDecoder net(ps, cfg, "");
    glorot_init(ps, 1);
    Tape t;
    std::mt19937_64 rng(1);
    CHECK(net.forward(t, random_matrix(3, 7, rng), random_matrix(2, 9, rng)).cols() == 16);
    CHECK(net.forward(t, random_matrix(3, 7, rng), random_matrix(2, 9, rng)).rows() == 2);
    CHECK_THROWS_AS(net.forward(t, random_matrix(3, 6, rng), random_matrix(1, 9, rng)),
                    DimensionError);
  }
  SUBCASE("zero inputs and zero affine outputs stay finite") {
    ParameterSet ps;
    const EncoderDecoder net(ps, cfg, "");
    for (const auto& p : ps.all()) std::fill(p->value.data.begin(), p->value.data.end(), 0.0);
    Tape t;
    for (double v : net.forward(t, Matrix(3, 7), Matrix(1, 9)).value().data) {
      CHECK(std::isfinite(v));
    }
  }
  SUBCASE("forward is bit-reproducible") {
    ParameterSet ps;
    const EncoderDecoder net(ps, cfg, "");
    glorot_init(ps, 9);
    std::mt19937_64 rng(9);
    const Matrix in = random_matrix(3, 7, rng);
    const Matrix q = random_matrix(1, 9, rng);
    Tape t1, t2;
    CHECK(net.forward(t1, in, q).value() == net.forward(t2, in, q).value());
  }
  SUBCASE("learned query variant") {
    auto c2 = cfg;
    c2.query_dim = 0;
    ParameterSet ps;
    const EncoderDecoder net(ps, c2, "");
    glorot_init(ps, 2);
    Tape t;
    std::mt19937_64 rng(2);
    CHECK(net.forward(t, random_matrix(3, 7, rng), Matrix()).rows() == 1);
  }
}

TEST_CASE("full encoder-decoder gradients, d_model 16, window 4, 20 seeds") {
  EncoderDecoderConfig cfg;
  cfg.input_dim = 32;
  cfg.query_dim = 9;
  cfg.d_model = 16;
  cfg.heads = 4;
  cfg.ffn = 32;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ParameterSet ps;
    const EncoderDecoder net(ps, cfg, "");
    glorot_init(ps, seed);
    std::mt19937_64 rng(seed + 100);
    // Non-trivial LayerNorm affine parameters so their gradients are exercised.
    for (const auto& p : ps.all()) {
      if (p->name.ends_with(".b") || p->name.ends_with(".beta") || p->name.ends_with(".gamma")) {
        std::uniform_real_distribution<double> u(-0.5, 0.5);
        for (double& x : p->value.data) x += u(rng);
      }
    }
    const Matrix input = random_matrix(3, 32, rng);
    const Matrix query = random_matrix(1, 9, rng);
    const Matrix w = random_matrix(1, 16, rng);
    const auto r = check_gradients(ps, [&](Tape& t) { return project(t, net.forward(t, input, query), w); });
    CAPTURE(seed);
    CAPTURE(r.worst_parameter);
    CHECK(r.max_rel_error < kTol);
    worst = std::max(worst, r.max_rel_error);
  }
  MESSAGE("worst model relative error: " << worst);
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    ParameterSet ps;
    auto& p = ps.add("x", 2, 2);
    p.value.data = {1, 2, 3, 4};
    Adam opt(ps);
    opt.step();
    CHECK(p.value.data == std::vector<double>{1, 2, 3, 4});
  }
  SUBCASE("non-finite gradient names the parameter") {
    ParameterSet ps;
    ps.add("ok", 1, 1);
    auto& bad = ps.add("enc.ffn.up.w", 1, 2);
    bad.grad.data[1] = std::nan("");
    Adam opt(ps);
    CHECK_THROWS_WITH_AS(opt.step(), doctest::Contains("enc.ffn.up.w"), TrainingError);
  }
  SUBCASE("same state and gradients give identical updates") {
    ParameterSet a, b;
    a.add("x", 1, 3).grad.data = {0.1, -0.2, 0.3};
    b.add("x", 1, 3).grad.data = {0.1, -0.2, 0.3};
    Adam oa(a), ob(b);
    for (int i = 0; i < 5; ++i) {
      oa.step();
      ob.step();
    }
    CHECK(a.flatten() == b.flatten());
  }
  SUBCASE("x^2 from 3 with lr 0.1") {
    ParameterSet ps;
    auto& x = ps.add("x", 1, 1);
    x.value.data[0] = 3.0;
    Adam opt(ps, AdamConfig{0.1});
    for (int i = 0; i < 200; ++i) {
      ps.zero_grad();
      Tape t;
      const Var v = t.param(x);
      t.backward(sum_all(mul(v, v)));
      opt.step();
    }
    CHECK(std::abs(x.value.data[0]) < 0.1);
    // Independent reference run of the same recurrence.
    CHECK(x.value.data[0] == doctest::Approx(kAdamToyReference).epsilon(1e-9));
  }
}

TEST_CASE("checkpoint codec") {
  std::mt19937_64 rng(4);
  std::vector<double> payload(100);
  std::normal_distribution<double> n(0.0, 1.0);
  for (double& v : payload) v = n(rng);
  payload[3] = -0.0;
  payload[4] = 1e-310;
  const nlohmann::json header{{"v", 1}, {"kind", "action"}};
  const auto bytes = encode_checkpoint(header, payload);
  const auto back = decode_checkpoint(bytes);
  CHECK(back.payload.size() == payload.size());
  CHECK(std::memcmp(back.payload.data(), payload.data(), payload.size() * 8) == 0);
  CHECK(encode_checkpoint(back.header, back.payload) == bytes);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 1)), FormatError);
  CHECK_THROWS_AS(decode_checkpoint("not json\n"), FormatError);
  // Little-endian: 1.0 is 00 00 00 00 00 00 f0 3f.
  const auto one = encode_checkpoint({{"v", 1}}, std::vector<double>{1.0});
  CHECK(one.substr(one.size() - 8) == std::string("\0\0\0\0\0\0\xf0\x3f", 8));
}
