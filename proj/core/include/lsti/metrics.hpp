#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lsti/agents.hpp"
#include "lsti/conflict.hpp"

namespace lsti {

inline constexpr double kDurationEpsilon = 1.0;

/// |(pred - gt) / (gt + eps)|. Throws Error when eps <= 0.
double relative_error(double pred, double gt, double eps = kDurationEpsilon);

/// Fraction of cases whose label is among the first k of its ranking.
/// Throws Error for k < 1 or mismatched lengths; an empty input gives 0.
double topk_accuracy(const std::vector<std::vector<std::size_t>>& rankings,
                     const std::vector<std::size_t>& labels, std::size_t k);

/// Hit iff gt_text is within the first k of set.rank(pred). Throws Error
/// when gt_text is not in the set or k < 1.
bool intention_topk(const Embedding& pred, std::string_view gt_text, const IntentionSet& set,
                    std::size_t k);

struct TopK {
  double top1 = 0.0;
  double top3 = 0.0;
  double top5 = 0.0;
};

/// Fractions in [0, 1]; the duration error is a mean fraction.
struct MethodMetrics {
  double duration_error = 0.0;
  TopK action;
  TopK short_intention;
  std::optional<TopK> long_intention;
  std::size_t samples = 0;
};

struct ParticipantMetrics {
  std::string participant;
  MethodMetrics structured;
  MethodMetrics baseline;
};

struct MetricsReport {
  std::vector<ParticipantMetrics> rows;

  /// Column means over participants.
  MethodMetrics mean_structured() const;
  MethodMetrics mean_baseline() const;

  /// Percentages rounded to 2 decimals; absent long-term cells are null.
  nlohmann::json to_json() const;
  std::string to_text() const;
};

/// The five trained networks used for one participant.
struct AgentBundle {
  const AgentModel* action = nullptr;
  const AgentModel* duration = nullptr;
  const AgentModel* short_intention = nullptr;
  const AgentModel* long_intention = nullptr;
  const AgentModel* baseline = nullptr;
};

/// Every report column on the test targets of corpus log `log_index`.
/// Throws Error on a fingerprint mismatch or a missing model.
ParticipantMetrics evaluate_participant(const AgentBundle& bundle, const Corpus& corpus,
                                        std::size_t log_index, const IntentionSet& set);

}  // namespace lsti
