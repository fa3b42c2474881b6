#include "lsti/agents.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "lsti/error.hpp"
#include "lsti/json_io.hpp"

namespace lsti {

namespace {

constexpr double kDurationCenter = 3.4;
constexpr double kDurationSpread = 1.5;

std::size_t action_count() { return kActionCount; }

}  // namespace

std::string_view to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::action: return "action";
    case AgentKind::duration: return "duration";
    case AgentKind::short_intention: return "short_intention";
    case AgentKind::long_intention: return "long_intention";
    case AgentKind::baseline_end_to_end: return "baseline_end_to_end";
  }
  return "?";
}

std::string_view manifest_key(AgentKind kind) {
  switch (kind) {
    case AgentKind::action: return "action";
    case AgentKind::duration: return "duration";
    case AgentKind::short_intention: return "short";
    case AgentKind::long_intention: return "long";
    case AgentKind::baseline_end_to_end: return "baseline";
  }
  return "?";
}

AgentKind agent_kind_from_string(std::string_view name) {
  for (AgentKind k : kAllAgentKinds) {
    if (name == to_string(k) || name == manifest_key(k)) return k;
  }
  throw ConfigError("unknown agent kind '" + std::string(name) + "'");
}

nlohmann::json Hyper::to_json() const {
  return {{"window", window}, {"d_model", d_model},       {"heads", heads},
          {"ffn", ffn},       {"batch", batch},           {"lr", lr},
          {"max_epochs", max_epochs}, {"patience", patience}};
}

Hyper Hyper::from_json(const nlohmann::json& j) {
  Hyper h;
  h.window = j.at("window").get<int>();
  h.d_model = j.at("d_model").get<std::size_t>();
  h.heads = j.at("heads").get<std::size_t>();
  h.ffn = j.at("ffn").get<std::size_t>();
  h.batch = j.at("batch").get<std::size_t>();
  h.lr = j.at("lr").get<double>();
  h.max_epochs = j.at("max_epochs").get<int>();
  h.patience = j.at("patience").get<int>();
  return h;
}

Hyper default_hyper(AgentKind kind) {
  Hyper h;
  if (kind == AgentKind::long_intention) h.window = kLongWindow;
  return h;
}

double duration_to_target(double minutes) {
  return (std::log1p(std::max(0.0, minutes)) - kDurationCenter) / kDurationSpread;
}

int duration_from_raw(double raw) {
  const double minutes = std::expm1(raw * kDurationSpread + kDurationCenter);
  if (!(minutes > 0.0)) return 0;
  return static_cast<int>(std::lround(std::min(minutes, 1e6)));
}

// ----------------------------------------------------------------- corpus

EncodedLog encode_log_with_targets(const ObservationLog& log, const ConflictGroundTruth& gt,
                                   const FeatureEncoder& encoder) {
  if (gt.labels.size() != log.events.size()) {
    throw Error("ground truth for " + log.participant_id + " has " +
                std::to_string(gt.labels.size()) + " labels for " +
                std::to_string(log.events.size()) + " events");
  }
  EncodedLog out;
  out.participant_id = log.participant_id;
  out.rows = encoder.encode_log(log, true);
  const auto& cfg = encoder.config();
  for (std::size_t i = 0; i < log.events.size(); ++i) {
    const auto& ev = log.events[i];
    out.actions.push_back(static_cast<std::size_t>(cfg.action_index(ev.action)));
    out.durations.push_back(ev.duration_min);
    out.intentions.push_back(ev.intention);
    out.long_intentions.push_back(gt.labels[i].expected_long_intention);
    out.intention_embeddings.push_back(embed_intention(ev.intention));
    out.long_embeddings.push_back(embed_intention(gt.labels[i].expected_long_intention));
  }
  return out;
}

Corpus make_corpus(const std::vector<LabeledLog>& logs, const WorldConfig& config,
                   const SplitRatios& ratios) {
  const FeatureEncoder encoder(config);
  Corpus c;
  c.config_fingerprint = config.fingerprint();
  c.layout_fingerprint = encoder.layout().fingerprint();
  for (const auto& l : logs) {
    const auto b = split_bounds(l.log.events.size(), ratios);
    const std::size_t li = c.logs.size();
    c.logs.push_back(encode_log_with_targets(l.log, l.gt, encoder));
    for (std::size_t i = 1; i < b.train_end; ++i) c.train.push_back({li, i});
    for (std::size_t i = b.train_end; i < b.val_end; ++i) c.val.push_back({li, i});
    for (std::size_t i = b.val_end; i < b.n; ++i) c.test.push_back({li, i});
  }
  return c;
}

// ------------------------------------------------------------- AgentModel

AgentModel::AgentModel(AgentKind kind, const Hyper& hyper, std::size_t base_width,
                       std::string config_fingerprint, std::string layout_fingerprint,
                       std::string participant, std::uint64_t seed)
    : kind_(kind),
      hyper_(hyper),
      base_width_(base_width),
      config_fingerprint_(std::move(config_fingerprint)),
      layout_fingerprint_(std::move(layout_fingerprint)),
      participant_(std::move(participant)),
      seed_(seed),
      params_(std::make_unique<ParameterSet>()) {
  if (hyper.window < 2) throw ConfigError("window must be at least 2");
  if (base_width <= kTimeFeatures) throw ConfigError("base width too small");
  switch (kind) {
    case AgentKind::action:
    case AgentKind::duration:
      input_width_ = base_width;
      query_width_ = kTimeFeatures;
      break;
    case AgentKind::short_intention:
      input_width_ = base_width;
      query_width_ = base_width;
      break;
    case AgentKind::long_intention:
      input_width_ = base_width + kEmbeddingDim;
      query_width_ = kTimeFeatures;
      break;
    case AgentKind::baseline_end_to_end:
      input_begin_ = kTimeFeatures;
      input_width_ = base_width - kTimeFeatures;
      query_width_ = 0;
      break;
  }
  EncoderDecoderConfig nc;
  nc.input_dim = input_width_;
  nc.query_dim = query_width_;
  nc.d_model = hyper.d_model;
  nc.heads = hyper.heads;
  nc.ffn = hyper.ffn;
  nc.max_len = static_cast<std::size_t>(hyper.window);
  net_ = std::make_unique<EncoderDecoder>(*params_, nc, "");
  head_ = Linear::make(*params_, "head", hyper.d_model, output_width());
  glorot_init(*params_, seed);
}

std::size_t AgentModel::output_width() const {
  switch (kind_) {
    case AgentKind::action: return action_count();
    case AgentKind::duration: return 1;
    case AgentKind::short_intention:
    case AgentKind::long_intention: return kEmbeddingDim;
    case AgentKind::baseline_end_to_end: return action_count() + 1 + kEmbeddingDim;
  }
  return 0;
}

Matrix AgentModel::window(const Matrix& rows, std::size_t end) const {
  const auto w = static_cast<std::size_t>(hyper_.window - 1);
  if (end > rows.rows) throw DimensionError("window end past the encoded log");
  if (input_begin_ + input_width_ > rows.cols) {
    throw DimensionError("encoded rows have " + std::to_string(rows.cols) + " columns, agent needs " +
                         std::to_string(input_begin_ + input_width_));
  }
  Matrix out(w, input_width_);
  const std::size_t have = std::min(end, w);
  for (std::size_t i = 0; i < have; ++i) {
    const auto src = rows.row(end - have + i);
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(input_begin_), input_width_,
                out.row(w - have + i).begin());
  }
  return out;
}

Matrix AgentModel::query(std::span<const double> target_row) const {
  if (query_width_ == 0) return {};
  if (target_row.size() < query_width_) throw DimensionError("target row shorter than the query");
  return Matrix::from_row(target_row.first(query_width_));
}

Var AgentModel::forward(Tape& t, const Matrix& window, const Matrix& query) const {
  if (window.rows != static_cast<std::size_t>(hyper_.window - 1)) {
    throw DimensionError("window has " + std::to_string(window.rows) + " rows, agent expects " +
                         std::to_string(hyper_.window - 1));
  }
  return head_(t, net_->forward(t, window, query));
}

std::vector<double> AgentModel::predict(const Matrix& window, const Matrix& query) const {
  Tape t;
  return forward(t, window, query).value().data;
}

std::vector<double> AgentModel::predict(const Matrix& rows, std::size_t target) const {
  return predict(window(rows, target), query(rows.row(target)));
}

void AgentModel::check_compatible(const Corpus& corpus) const {
  if (corpus.config_fingerprint != config_fingerprint_) {
    throw Error("checkpoint config fingerprint " + config_fingerprint_ + " does not match data " +
                corpus.config_fingerprint);
  }
  if (corpus.layout_fingerprint != layout_fingerprint_) {
    throw Error("checkpoint layout fingerprint " + layout_fingerprint_ + " does not match data " +
                corpus.layout_fingerprint);
  }
}

std::string AgentModel::serialize() const {
  const nlohmann::json header{{"v", kSchemaVersion},
                              {"format", "lsti-checkpoint"},
                              {"kind", to_string(kind_)},
                              {"hyper", hyper_.to_json()},
                              {"base_width", base_width_},
                              {"config_fingerprint", config_fingerprint_},
                              {"layout_fingerprint", layout_fingerprint_},
                              {"participant", participant_},
                              {"seed", seed_},
                              {"parameters", params_->shapes()}};
  return encode_checkpoint(header, params_->flatten());
}

AgentModel AgentModel::deserialize(std::string_view bytes) {
  auto d = decode_checkpoint(bytes);
  const auto& h = d.header;
  if (h.value("format", "") != "lsti-checkpoint" || h.value("v", 0) != kSchemaVersion) {
    throw FormatError("not an lsti checkpoint (or unsupported version)");
  }
  try {
    AgentModel m(agent_kind_from_string(h.at("kind").get<std::string>()),
                 Hyper::from_json(h.at("hyper")), h.at("base_width").get<std::size_t>(),
                 h.at("config_fingerprint").get<std::string>(),
                 h.at("layout_fingerprint").get<std::string>(),
                 h.at("participant").get<std::string>(), h.at("seed").get<std::uint64_t>());
    if (m.params_->shapes() != h.at("parameters")) {
      throw FormatError("checkpoint parameter shapes do not match the architecture");
    }
    m.params_->assign(d.payload);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
}

void AgentModel::save(const std::filesystem::path& path) const { write_file(path, serialize()); }

AgentModel AgentModel::load(const std::filesystem::path& path) {
  try {
    return deserialize(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

AgentModel AgentModel::clone() const { return deserialize(serialize()); }

// --------------------------------------------------------------- training

Var sample_loss(Tape& t, const AgentModel& model, const EncodedLog& log, std::size_t target) {
  const Var out = model.forward(t, model.window(log.rows, target), model.query(log.rows.row(target)));
  const auto as_row = [](const Embedding& e) { return Matrix::from_row(e); };
  const std::size_t action = log.actions[target];
  switch (model.kind()) {
    case AgentKind::action:
      return cross_entropy(out, std::span(&action, 1));
    case AgentKind::duration:
      return mse(out, Matrix(1, 1, duration_to_target(log.durations[target])));
    case AgentKind::short_intention:
      return cosine_embedding_loss(out, as_row(log.intention_embeddings[target]));
    case AgentKind::long_intention:
      return cosine_embedding_loss(out, as_row(log.long_embeddings[target]));
    case AgentKind::baseline_end_to_end: {
      const Var a = cross_entropy(slice_cols(out, 0, kActionCount), std::span(&action, 1));
      const Var d = mse(slice_cols(out, kActionCount, 1),
                        Matrix(1, 1, duration_to_target(log.durations[target])));
      const Var i = cosine_embedding_loss(slice_cols(out, kActionCount + 1, kEmbeddingDim),
                                          as_row(log.intention_embeddings[target]));
      return add(add(a, d), i);
    }
  }
  throw Error("unreachable");
}

double mean_loss(const AgentModel& model, const Corpus& corpus, const std::vector<SampleRef>& refs) {
  if (refs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& r : refs) {
    Tape t;
    total += sample_loss(t, model, corpus.logs[r.log], r.target).value().data[0];
  }
  return total / static_cast<double>(refs.size());
}

namespace {

TrainResult run_training(AgentModel model, const Corpus& corpus, const Hyper& hyper,
                         std::uint64_t seed, const TrainOptions& options) {
  if (corpus.train.empty()) throw TrainingError("no training samples");
  if (corpus.val.empty()) throw TrainingError("no validation samples");
  model.check_compatible(corpus);

  Adam opt(model.params(), AdamConfig{hyper.lr});
  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  std::vector<SampleRef> order = corpus.train;

  double best = mean_loss(model, corpus, corpus.val);
  if (!std::isfinite(best)) throw TrainingError("non-finite validation loss before epoch 1");
  std::vector<double> best_params = model.params().flatten();
  std::vector<double> history{best};
  int best_epoch = 0;
  int stale = 0;
  const std::size_t batch = std::max<std::size_t>(1, hyper.batch);

  for (int epoch = 1; epoch <= hyper.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double train_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const double inv = 1.0 / static_cast<double>(end - start);
      model.params().zero_grad();
      for (std::size_t i = start; i < end; ++i) {
        Tape t;
        const Var loss = sample_loss(t, model, corpus.logs[order[i].log], order[i].target);
        train_total += loss.value().data[0];
        t.backward(scale(loss, inv));
      }
      if (!std::isfinite(train_total)) {
        throw TrainingError("non-finite training loss in epoch " + std::to_string(epoch));
      }
      opt.step();
    }
    const double val = mean_loss(model, corpus, corpus.val);
    if (!std::isfinite(val)) {
      throw TrainingError("non-finite validation loss in epoch " + std::to_string(epoch));
    }
    history.push_back(val);
    if (options.on_epoch) {
      options.on_epoch(epoch, train_total / static_cast<double>(order.size()), val);
    }
    if (val < best) {
      best = val;
      best_params = model.params().flatten();
      best_epoch = epoch;
      stale = 0;
    } else if (++stale >= hyper.patience) {
      break;
    }
  }
  model.params().assign(best_params);
  model.params().zero_grad();
  return TrainResult{std::move(model), std::move(history), best_epoch};
}

}  // namespace

TrainResult train_agent(AgentKind kind, const Corpus& corpus, const Hyper& hyper,
                        std::uint64_t seed, const TrainOptions& options) {
  if (corpus.logs.empty()) throw TrainingError("empty corpus");
  const std::size_t base_width = corpus.logs.front().rows.cols - kEmbeddingDim;
  AgentModel model(kind, hyper, base_width, corpus.config_fingerprint, corpus.layout_fingerprint,
                   "base", seed);
  return run_training(std::move(model), corpus, hyper, seed, options);
}

TrainResult finetune(const AgentModel& base, const Corpus& corpus, const Hyper& hyper,
                     std::uint64_t seed, std::string participant, const TrainOptions& options) {
  if (hyper.window != base.hyper().window || hyper.d_model != base.hyper().d_model ||
      hyper.heads != base.hyper().heads || hyper.ffn != base.hyper().ffn) {
    throw ConfigError("fine-tuning hyperparameters change the base architecture");
  }
  AgentModel model = base.clone();
  model.set_participant(std::move(participant));
  return run_training(std::move(model), corpus, hyper, seed, options);
}

// ---------------------------------------------------------- IntentionSet

IntentionSet::IntentionSet(std::string participant, const std::vector<std::string>& texts)
    : participant_(std::move(participant)) {
  std::set<std::string> uniq;
  for (const auto& t : texts) {
    auto n = normalize_text(t);
    if (!n.empty()) uniq.insert(std::move(n));
  }
  texts_.assign(uniq.begin(), uniq.end());
  for (const auto& t : texts_) embeddings_.push_back(embed_intention(t));
}

IntentionSet IntentionSet::from_log(const ObservationLog& log) {
  std::vector<std::string> texts;
  for (const auto& ev : log.events) texts.push_back(ev.intention);
  return IntentionSet(log.participant_id, texts);
}

bool IntentionSet::contains(std::string_view text) const {
  return std::binary_search(texts_.begin(), texts_.end(), normalize_text(text));
}

std::vector<IntentionSet::Ranked> IntentionSet::rank(const Embedding& pred) const {
  std::vector<Ranked> out;
  for (std::size_t i = 0; i < texts_.size(); ++i) {
    const double s = cosine(pred, embeddings_[i]);
    out.push_back({texts_[i], s});
  }
  std::vector<std::size_t> idx(out.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto ka = std::llround(out[a].similarity * 1e12);
    const auto kb = std::llround(out[b].similarity * 1e12);
    if (ka != kb) return ka > kb;
    return out[a].text < out[b].text;
  });
  std::vector<Ranked> sorted;
  sorted.reserve(out.size());
  for (std::size_t i : idx) sorted.push_back(out[i]);
  return sorted;
}

std::vector<IntentionSet::Ranked> IntentionSet::top(const Embedding& pred, std::size_t k) const {
  if (k > texts_.size()) {
    throw Error("K = " + std::to_string(k) + " exceeds the intention set size " +
                std::to_string(texts_.size()));
  }
  auto r = rank(pred);
  r.resize(k);
  return r;
}

// ------------------------------------------------------------ prediction

namespace {

void require_kind(const AgentModel& m, AgentKind k) {
  if (m.kind() != k) {
    throw ConfigError("expected a " + std::string(to_string(k)) + " checkpoint, got " +
                      std::string(to_string(m.kind())));
  }
}

Embedding to_unit(std::span<const double> v) {
  Embedding e{};
  std::copy_n(v.begin(), kEmbeddingDim, e.begin());
  const double n = norm(e);
  if (n == 0.0) {
    e[0] = 1.0;
    return e;
  }
  for (double& x : e) x /= n;
  return e;
}

}  // namespace

std::vector<double> predict_action(const AgentModel& model, const Matrix& window,
                                   const Matrix& query) {
  require_kind(model, AgentKind::action);
  return softmax(model.predict(window, query));
}

int predict_duration(const AgentModel& model, const Matrix& window, const Matrix& query) {
  require_kind(model, AgentKind::duration);
  return duration_from_raw(model.predict(window, query)[0]);
}

Embedding predict_short_intention(const AgentModel& model, const Matrix& window,
                                  const Matrix& query) {
  require_kind(model, AgentKind::short_intention);
  return to_unit(model.predict(window, query));
}

std::vector<IntentionSet::Ranked> predict_long_intentions(const AgentModel& model,
                                                          const Matrix& window,
                                                          const Matrix& query,
                                                          const IntentionSet& set, std::size_t k) {
  require_kind(model, AgentKind::long_intention);
  if (k > set.size()) {
    throw Error("K = " + std::to_string(k) + " exceeds the intention set size " +
                std::to_string(set.size()));
  }
  return set.top(to_unit(model.predict(window, query)), k);
}

BaselinePrediction baseline_predict(const AgentModel& model, const Matrix& window) {
  require_kind(model, AgentKind::baseline_end_to_end);
  const auto raw = model.predict(window, Matrix());
  BaselinePrediction p;
  p.action_probs = softmax(std::span(raw).first(kActionCount));
  p.duration_min = duration_from_raw(raw[kActionCount]);
  p.intention = to_unit(std::span(raw).subspan(kActionCount + 1, kEmbeddingDim));
  return p;
}

std::vector<std::size_t> rank_actions(const std::vector<double>& probs) {
  std::vector<std::size_t> idx(probs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  return idx;
}

// --------------------------------------------------------------- manifest

Manifest Manifest::load(const std::filesystem::path& path) {
  const auto j = read_json(path);
  Manifest m;
  try {
    for (const auto& [participant, kinds] : j.at("participants").items()) {
      for (const auto& [kind, file] : kinds.items()) {
        agent_kind_from_string(kind);
        m.entries[participant][kind] = file.get<std::string>();
      }
    }
    if (j.contains("intentions")) {
      for (const auto& [participant, texts] : j.at("intentions").items()) {
        m.intentions[participant] = texts.get<std::vector<std::string>>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return m;
}

void Manifest::save(const std::filesystem::path& path) const {
  nlohmann::json j{{"v", kSchemaVersion}, {"participants", nlohmann::json::object()}};
  for (const auto& [participant, kinds] : entries) {
    for (const auto& [kind, file] : kinds) j["participants"][participant][kind] = file;
  }
  if (!intentions.empty()) {
    j["intentions"] = nlohmann::json::object();
    for (const auto& [participant, texts] : intentions) j["intentions"][participant] = texts;
  }
  write_json(path, j);
}

std::filesystem::path Manifest::path_of(const std::filesystem::path& manifest_path,
                                        const std::string& participant, AgentKind kind) const {
  const auto p = entries.find(participant);
  if (p == entries.end()) throw NotFoundError("manifest has no participant '" + participant + "'");
  const auto k = p->second.find(std::string(manifest_key(kind)));
  if (k == p->second.end()) {
    throw NotFoundError("manifest has no " + std::string(manifest_key(kind)) + " checkpoint for '" +
                        participant + "'");
  }
  return manifest_path.parent_path() / k->second;
}

}  // namespace lsti
