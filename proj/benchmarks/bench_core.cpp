#include <benchmark/benchmark.h>

#include <random>

#include "lsti/pipeline.hpp"

using namespace lsti;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(r, c);
  for (double& x : m.data) x = u(rng);
  return m;
}

const LabeledLog& sample_log() {
  static const LabeledLog l = simulate_participant(deterministic_persona(), default_world_config(), 28, 42);
  return l;
}

EncoderDecoderConfig net_config(std::size_t input_dim, std::size_t d_model) {
  EncoderDecoderConfig c;
  c.input_dim = input_dim;
  c.query_dim = kTimeFeatures;
  c.d_model = d_model;
  c.heads = 4;
  c.ffn = 2 * d_model;
  return c;
}

}  // namespace

static void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 1);
  const Matrix b = random_matrix(n, n, 2);
  for (auto _ : state) {
    Tape t;
    benchmark::DoNotOptimize(matmul(t.constant(a), t.constant(b)).value().data.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(16, 128)->Complexity();

static void BM_AttentionForward(benchmark::State& state) {
  const auto window = static_cast<std::size_t>(state.range(0));
  ParameterSet ps;
  const EncoderDecoder net(ps, net_config(32, 64), "");
  glorot_init(ps, 1);
  const Matrix in = random_matrix(window - 1, 32, 3);
  const Matrix q = random_matrix(1, kTimeFeatures, 4);
  for (auto _ : state) {
    Tape t;
    benchmark::DoNotOptimize(net.forward(t, in, q).value().data.data());
  }
}
BENCHMARK(BM_AttentionForward)->Arg(16)->Arg(64);

static void BM_AttentionBackward(benchmark::State& state) {
  const auto window = static_cast<std::size_t>(state.range(0));
  ParameterSet ps;
  const EncoderDecoder net(ps, net_config(32, 64), "");
  glorot_init(ps, 1);
  const Matrix in = random_matrix(window - 1, 32, 3);
  const Matrix q = random_matrix(1, kTimeFeatures, 4);
  for (auto _ : state) {
    Tape t;
    const Var loss = sum_all(net.forward(t, in, q));
    t.backward(loss);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_AttentionBackward)->Arg(16)->Arg(64);

static void BM_EmbedIntention(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(embed_intention("clean the kitchen after dinner"));
}
BENCHMARK(BM_EmbedIntention);

static void BM_EncodeLog(benchmark::State& state) {
  const FeatureEncoder encoder(default_world_config());
  const auto& log = sample_log().log;
  for (auto _ : state) benchmark::DoNotOptimize(encoder.encode_log(log, true).data.data());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(log.events.size()));
}
BENCHMARK(BM_EncodeLog);

static void BM_PredictAction(benchmark::State& state) {
  const auto corpus = make_corpus({sample_log()}, default_world_config());
  const AgentModel model(AgentKind::action, default_hyper(AgentKind::action),
                         FeatureLayout::for_config(default_world_config()).base_width,
                         corpus.config_fingerprint, corpus.layout_fingerprint, "base", 1);
  const auto& rows = corpus.logs.front().rows;
  const std::size_t t = corpus.test.front().target;
  const Matrix window = model.window(rows, t);
  const Matrix query = model.query(rows.row(t));
  for (auto _ : state) benchmark::DoNotOptimize(predict_action(model, window, query));
}
BENCHMARK(BM_PredictAction);

BENCHMARK_MAIN();
