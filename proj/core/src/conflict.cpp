#include "lsti/conflict.hpp"

#include <algorithm>
#include <limits>

#include "lsti/error.hpp"

namespace lsti {

double distance(const Embedding& a, const Embedding& b) {
  if (norm(a) == 0.0 || norm(b) == 0.0) throw Error("distance: zero-norm intention embedding");
  return std::clamp(1.0 - cosine(a, b), 0.0, 2.0);
}

int conflict_decision(double min_distance, double delta) { return min_distance > delta ? 1 : 0; }

std::string conflict_query(const std::string& planned, const std::string& actual) {
  return "You planned to " + planned + "; you appear to be " + actual +
         ". Should I help you switch?";
}

ConflictReport detect(const Embedding& short_embedding, const std::string& short_text,
                      const std::vector<LongCandidate>& long_list, double delta, Instant t_k) {
  if (long_list.empty()) throw Error("detect: empty long-term intention list");
  if (!(delta >= 0.0 && delta <= 2.0)) throw Error("detect: threshold must lie in [0, 2]");
  ConflictReport r;
  r.threshold = delta;
  r.short_intention = short_text;
  r.short_embedding = short_embedding;
  r.long_list = long_list;
  r.t_k = t_k;
  r.min_distance = std::numeric_limits<double>::infinity();
  for (const auto& c : long_list) {
    r.min_distance = std::min(r.min_distance, distance(short_embedding, c.embedding));
  }
  r.r_conf = conflict_decision(r.min_distance, delta);
  if (r.r_conf == 1) r.query_text = conflict_query(long_list.front().text, short_text);
  return r;
}

bool overrun_gate_open(Instant start, int predicted_duration_min,
                       std::optional<Instant> next_scheduled_start) {
  if (!next_scheduled_start) return true;
  return start + predicted_duration_min > *next_scheduled_start;
}

DetectorScores evaluate_detector(const std::vector<ConflictReport>& reports,
                                 const ConflictGroundTruth& gt) {
  std::vector<bool> seen(gt.labels.size(), false);
  DetectorScores s;
  for (const auto& r : reports) {
    if (r.event_index >= gt.labels.size()) {
      throw Error("report for event " + std::to_string(r.event_index) + " outside ground truth of " +
                  std::to_string(gt.labels.size()) + " events");
    }
    if (seen[r.event_index]) {
      throw Error("two reports for event " + std::to_string(r.event_index));
    }
    seen[r.event_index] = true;
    const bool truth = gt.labels[r.event_index].is_conflict;
    const bool fired = r.r_conf == 1;
    if (truth && fired) ++s.tp;
    if (truth && !fired) ++s.fn;
    if (!truth && fired) ++s.fp;
    if (!truth && !fired) ++s.tn;
  }
  const auto ratio = [](std::size_t a, std::size_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  s.recall = ratio(s.tp, s.tp + s.fn);
  s.false_positive_rate = ratio(s.fp, s.fp + s.tn);
  s.precision = ratio(s.tp, s.tp + s.fp);
  return s;
}

std::vector<ConflictReport> detect_oracle(const ObservationLog& log, const ConflictGroundTruth& gt,
                                          double delta) {
  if (gt.labels.size() != log.events.size()) {
    throw Error("ground truth does not align with the log");
  }
  std::vector<ConflictReport> out;
  out.reserve(log.events.size());
  for (std::size_t i = 0; i < log.events.size(); ++i) {
    const auto& label = gt.labels[i];
    const LongCandidate expected{label.expected_long_intention,
                                 embed_intention(label.expected_long_intention), 1.0};
    auto r = detect(embed_intention(log.events[i].intention), log.events[i].intention, {expected},
                    delta, log.events[i].start());
    r.event_index = i;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace lsti
