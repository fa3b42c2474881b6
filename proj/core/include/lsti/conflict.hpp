#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "lsti/calendar.hpp"
#include "lsti/encoding.hpp"
#include "lsti/persona.hpp"

namespace lsti {

inline constexpr double kDefaultDelta = 0.3;
inline constexpr std::size_t kDefaultListSize = 5;

/// One entry of a long-term intention list.
struct LongCandidate {
  std::string text;
  Embedding embedding{};
  double similarity = 0.0;

  bool operator==(const LongCandidate&) const = default;
};

struct ConflictReport {
  int r_conf = 0;
  double min_distance = 0.0;
  double threshold = kDefaultDelta;
  std::string short_intention;
  Embedding short_embedding{};
  std::vector<LongCandidate> long_list;
  std::string query_text;
  Instant t_k = 0;
  /// Position of the judged event in its log.
  std::size_t event_index = 0;

  bool operator==(const ConflictReport&) const = default;
};

/// D = 1 - cos(a, b), in [0, 2]. Throws Error for a zero vector.
double distance(const Embedding& a, const Embedding& b);

/// 1 iff min_distance > delta.
int conflict_decision(double min_distance, double delta);

std::string conflict_query(const std::string& planned, const std::string& actual);

/// Compares the short-term intention against every list entry. Throws Error
/// for an empty list or delta outside [0, 2].
ConflictReport detect(const Embedding& short_embedding, const std::string& short_text,
                      const std::vector<LongCandidate>& long_list, double delta, Instant t_k);

/// Optional duration-overrun gate: a conflict is only evaluated when the
/// predicted end of the current action passes the next scheduled routine
/// start.
bool overrun_gate_open(Instant start, int predicted_duration_min,
                       std::optional<Instant> next_scheduled_start);

struct DetectorScores {
  double recall = 0.0;
  double false_positive_rate = 0.0;
  double precision = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Confusion-matrix rates of r_conf against is_conflict. Reports must cover
/// distinct events of the ground truth; a missing or out-of-range index
/// throws Error. Rates with an empty denominator are 0.
DetectorScores evaluate_detector(const std::vector<ConflictReport>& reports,
                                 const ConflictGroundTruth& gt);

/// Oracle pipeline: the actual intention of every event is the short-term
/// side; the scheduled intention alone is the long-term list.
std::vector<ConflictReport> detect_oracle(const ObservationLog& log, const ConflictGroundTruth& gt,
                                          double delta = kDefaultDelta);

}  // namespace lsti
