#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lsti/encoding.hpp"
#include "lsti/nn.hpp"
#include "lsti/persona.hpp"

namespace lsti {

enum class AgentKind { action, duration, short_intention, long_intention, baseline_end_to_end };

inline constexpr std::array<AgentKind, 5> kAllAgentKinds{
    AgentKind::action, AgentKind::duration, AgentKind::short_intention,
    AgentKind::long_intention, AgentKind::baseline_end_to_end};

std::string_view to_string(AgentKind kind);
/// Accepts the names written by to_string plus the manifest keys "short",
/// "long" and "baseline". Throws ConfigError otherwise.
AgentKind agent_kind_from_string(std::string_view name);

struct Hyper {
  int window = kShortWindow;
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t ffn = 128;
  std::size_t batch = 32;
  double lr = 1e-3;
  int max_epochs = 50;
  int patience = 5;

  bool operator==(const Hyper&) const = default;
  nlohmann::json to_json() const;
  static Hyper from_json(const nlohmann::json& j);
};

/// W = 64 for the long-term agent, 16 otherwise.
Hyper default_hyper(AgentKind kind);

/// Duration regression target: log1p(minutes) / log1p(1440).
double duration_to_target(double minutes);
/// Inverse of duration_to_target, clamped at 0 and rounded to whole minutes.
int duration_from_raw(double raw);

/// One participant's log, encoded once (with the intention block) together
/// with every per-event target.
struct EncodedLog {
  std::string participant_id;
  Matrix rows;
  std::vector<std::size_t> actions;
  std::vector<int> durations;
  std::vector<std::string> intentions;       // actual, short-term
  std::vector<std::string> long_intentions;  // scheduled, long-term
  std::vector<Embedding> intention_embeddings;
  std::vector<Embedding> long_embeddings;
};

EncodedLog encode_log_with_targets(const ObservationLog& log, const ConflictGroundTruth& gt,
                                   const FeatureEncoder& encoder);

struct SampleRef {
  std::size_t log = 0;
  std::size_t target = 0;
};

/// Encoded logs plus chronological train/val/test target lists. Windows are
/// cut from the full log, so validation and test windows keep their
/// preceding history.
struct Corpus {
  std::vector<EncodedLog> logs;
  std::vector<SampleRef> train;
  std::vector<SampleRef> val;
  std::vector<SampleRef> test;
  std::string config_fingerprint;
  std::string layout_fingerprint;
};

struct LabeledLog {
  ObservationLog log;
  ConflictGroundTruth gt;
};

/// Splits every log 70/10/20 by event index. Target 0 (no history) is never
/// a training sample.
Corpus make_corpus(const std::vector<LabeledLog>& logs, const WorldConfig& config,
                   const SplitRatios& ratios = {});

/// One trained network: an encoder-decoder trunk and the kind's output
/// head(s). Movable, not copyable; see clone().
class AgentModel {
 public:
  /// `base_width`: encoded row width without the intention block.
  AgentModel(AgentKind kind, const Hyper& hyper, std::size_t base_width,
             std::string config_fingerprint, std::string layout_fingerprint,
             std::string participant, std::uint64_t seed);

  AgentKind kind() const { return kind_; }
  const Hyper& hyper() const { return hyper_; }
  const std::string& participant() const { return participant_; }
  void set_participant(std::string p) { participant_ = std::move(p); }
  const std::string& config_fingerprint() const { return config_fingerprint_; }
  const std::string& layout_fingerprint() const { return layout_fingerprint_; }
  std::uint64_t seed() const { return seed_; }
  ParameterSet& params() { return *params_; }
  const ParameterSet& params() const { return *params_; }

  /// Columns of an encoded row fed to the encoder: [begin, begin + width).
  std::size_t input_begin() const { return input_begin_; }
  std::size_t input_width() const { return input_width_; }
  /// Prefix of the target row used as the decoder query; 0 = learned query.
  std::size_t query_width() const { return query_width_; }
  std::size_t output_width() const;

  /// W-1 rows preceding `end` (exclusive), zero-padded at the front.
  Matrix window(const Matrix& rows, std::size_t end) const;
  /// Query token from the target row.
  Matrix query(std::span<const double> target_row) const;

  /// 1 × output_width.
  Var forward(Tape& t, const Matrix& window, const Matrix& query) const;
  std::vector<double> predict(const Matrix& window, const Matrix& query) const;
  std::vector<double> predict(const Matrix& rows, std::size_t target) const;

  /// Throws Error when fingerprints differ.
  void check_compatible(const Corpus& corpus) const;

  std::string serialize() const;
  static AgentModel deserialize(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static AgentModel load(const std::filesystem::path& path);
  AgentModel clone() const;

 private:
  AgentKind kind_;
  Hyper hyper_;
  std::size_t base_width_;
  std::string config_fingerprint_;
  std::string layout_fingerprint_;
  std::string participant_;
  std::uint64_t seed_;
  std::size_t input_begin_ = 0;
  std::size_t input_width_ = 0;
  std::size_t query_width_ = 0;
  std::unique_ptr<ParameterSet> params_;
  std::unique_ptr<EncoderDecoder> net_;
  Linear head_;
};

/// Loss of one sample under the kind's objective.
Var sample_loss(Tape& t, const AgentModel& model, const EncodedLog& log, std::size_t target);
/// Mean loss over refs, forward only.
double mean_loss(const AgentModel& model, const Corpus& corpus, const std::vector<SampleRef>& refs);

struct TrainOptions {
  /// Evaluated after every epoch, for progress reporting.
  std::function<void(int epoch, double train_loss, double val_loss)> on_epoch;
};

struct TrainResult {
  AgentModel model;
  std::vector<double> val_history;  // index 0 = before training
  int best_epoch = 0;
};

/// Trains from a fresh seeded initialization; returns the best-validation
/// weights. Early stops after `patience` epochs without improvement.
TrainResult train_agent(AgentKind kind, const Corpus& corpus, const Hyper& hyper,
                        std::uint64_t seed, const TrainOptions& options = {});
/// Continues from a copy of `base` on the corpus; `base` is not modified.
TrainResult finetune(const AgentModel& base, const Corpus& corpus, const Hyper& hyper,
                     std::uint64_t seed, std::string participant,
                     const TrainOptions& options = {});

/// Deduplicated intention texts of one participant with unit embeddings.
class IntentionSet {
 public:
  IntentionSet() = default;
  IntentionSet(std::string participant, const std::vector<std::string>& texts);
  static IntentionSet from_log(const ObservationLog& log);

  const std::string& participant() const { return participant_; }
  const std::vector<std::string>& texts() const { return texts_; }
  const std::vector<Embedding>& embeddings() const { return embeddings_; }
  std::size_t size() const { return texts_.size(); }
  bool contains(std::string_view text) const;

  struct Ranked {
    std::string text;
    double similarity = 0.0;
  };
  /// All entries by descending cosine to `pred`. Similarities equal after
  /// rounding to 1e-12 tie and break lexicographically.
  std::vector<Ranked> rank(const Embedding& pred) const;
  /// First k of rank(). Throws Error when k exceeds the set size.
  std::vector<Ranked> top(const Embedding& pred, std::size_t k) const;

 private:
  std::string participant_;
  std::vector<std::string> texts_;
  std::vector<Embedding> embeddings_;
};

/// Probability vector over the action vocabulary.
std::vector<double> predict_action(const AgentModel& model, const Matrix& window,
                                   const Matrix& query);
int predict_duration(const AgentModel& model, const Matrix& window, const Matrix& query);
/// Unit-norm embedding.
Embedding predict_short_intention(const AgentModel& model, const Matrix& window,
                                  const Matrix& query);
std::vector<IntentionSet::Ranked> predict_long_intentions(const AgentModel& model,
                                                          const Matrix& window,
                                                          const Matrix& query,
                                                          const IntentionSet& set, std::size_t k);

/// Joint heads of the end-to-end baseline. It has no long-term output.
struct BaselinePrediction {
  std::vector<double> action_probs;
  int duration_min = 0;
  Embedding intention{};
};
BaselinePrediction baseline_predict(const AgentModel& model, const Matrix& window);

/// Action indices by descending probability, ties by ascending index.
std::vector<std::size_t> rank_actions(const std::vector<double>& probs);

/// participant -> kind -> checkpoint path (relative to the manifest).
struct Manifest {
  std::map<std::string, std::map<std::string, std::string>> entries;
  /// participant -> intention texts seen in its training data.
  std::map<std::string, std::vector<std::string>> intentions;

  static Manifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  /// Resolved path of one checkpoint. Throws NotFoundError.
  std::filesystem::path path_of(const std::filesystem::path& manifest_path,
                                const std::string& participant, AgentKind kind) const;
};

/// Manifest key of a kind: action, duration, short, long, baseline.
std::string_view manifest_key(AgentKind kind);

}  // namespace lsti
