#include "lsti/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "lsti/error.hpp"

namespace lsti {

double relative_error(double pred, double gt, double eps) {
  if (!(eps > 0.0)) throw Error("relative_error: epsilon must be positive");
  return std::abs((pred - gt) / (gt + eps));
}

double topk_accuracy(const std::vector<std::vector<std::size_t>>& rankings,
                     const std::vector<std::size_t>& labels, std::size_t k) {
  if (k < 1) throw Error("topk_accuracy: k must be at least 1");
  if (rankings.size() != labels.size()) {
    throw Error("topk_accuracy: " + std::to_string(rankings.size()) + " rankings for " +
                std::to_string(labels.size()) + " labels");
  }
  if (rankings.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < rankings.size(); ++i) {
    const auto& r = rankings[i];
    const auto n = std::min(k, r.size());
    for (std::size_t j = 0; j < n; ++j) {
      if (r[j] == labels[i]) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(rankings.size());
}

bool intention_topk(const Embedding& pred, std::string_view gt_text, const IntentionSet& set,
                    std::size_t k) {
  if (k < 1) throw Error("intention_topk: k must be at least 1");
  const auto gt = normalize_text(gt_text);
  if (!set.contains(gt)) throw Error("intention '" + gt + "' is not in the intention set");
  const auto ranked = set.rank(pred);
  const auto n = std::min(k, ranked.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (ranked[i].text == gt) return true;
  }
  return false;
}

namespace {

struct Tally {
  std::size_t n = 0, h1 = 0, h3 = 0, h5 = 0;

  void add(std::size_t position) {
    ++n;
    h1 += position < 1;
    h3 += position < 3;
    h5 += position < 5;
  }
  TopK rates() const {
    if (n == 0) return {};
    const auto d = static_cast<double>(n);
    return {static_cast<double>(h1) / d, static_cast<double>(h3) / d, static_cast<double>(h5) / d};
  }
};

std::size_t position_of(const std::vector<std::size_t>& ranking, std::size_t label) {
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (ranking[i] == label) return i;
  }
  return ranking.size();
}

std::size_t position_of(const std::vector<IntentionSet::Ranked>& ranking, const std::string& text) {
  const auto gt = normalize_text(text);
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (ranking[i].text == gt) return i;
  }
  throw Error("intention '" + gt + "' is not in the intention set");
}

void require(const AgentModel* m, AgentKind kind, const Corpus& corpus) {
  if (m == nullptr) throw Error("missing " + std::string(to_string(kind)) + " model");
  if (m->kind() != kind) {
    throw Error("expected a " + std::string(to_string(kind)) + " model, got " +
                std::string(to_string(m->kind())));
  }
  m->check_compatible(corpus);
}

MethodMetrics mean_of(const std::vector<const MethodMetrics*>& ms) {
  MethodMetrics out;
  if (ms.empty()) return out;
  const auto n = static_cast<double>(ms.size());
  bool all_long = true;
  TopK lsum;
  for (const auto* m : ms) {
    out.duration_error += m->duration_error / n;
    out.action.top1 += m->action.top1 / n;
    out.action.top3 += m->action.top3 / n;
    out.action.top5 += m->action.top5 / n;
    out.short_intention.top1 += m->short_intention.top1 / n;
    out.short_intention.top3 += m->short_intention.top3 / n;
    out.short_intention.top5 += m->short_intention.top5 / n;
    out.samples += m->samples;
    if (m->long_intention) {
      lsum.top1 += m->long_intention->top1 / n;
      lsum.top3 += m->long_intention->top3 / n;
      lsum.top5 += m->long_intention->top5 / n;
    } else {
      all_long = false;
    }
  }
  if (all_long) out.long_intention = lsum;
  return out;
}

double pct(double fraction) { return std::round(fraction * 10000.0) / 100.0; }

nlohmann::json topk_json(const TopK& t) {
  return {{"top1", pct(t.top1)}, {"top3", pct(t.top3)}, {"top5", pct(t.top5)}};
}

nlohmann::json method_json(const MethodMetrics& m) {
  nlohmann::json j;
  j["duration_error_pct"] = pct(m.duration_error);
  j["action"] = topk_json(m.action);
  j["short_intention"] = topk_json(m.short_intention);
  j["long_intention"] = m.long_intention ? topk_json(*m.long_intention) : nlohmann::json(nullptr);
  j["samples"] = m.samples;
  return j;
}

std::string fmt(double fraction) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f", pct(fraction));
  return buf;
}

void text_row(std::ostringstream& os, const std::string& who, const char* method,
              const MethodMetrics& m) {
  char buf[256];
  const auto cells = [](const std::optional<TopK>& t) {
    if (!t) return std::string("     -      -      -");
    char b[64];
    std::snprintf(b, sizeof b, "%6s %6s %6s", fmt(t->top1).c_str(), fmt(t->top3).c_str(),
                  fmt(t->top5).c_str());
    return std::string(b);
  };
  std::snprintf(buf, sizeof buf, "%-12s %-10s %8s | %s | %s | %s\n", who.c_str(), method,
                fmt(m.duration_error).c_str(), cells(m.action).c_str(),
                cells(m.short_intention).c_str(), cells(m.long_intention).c_str());
  os << buf;
}

}  // namespace

MethodMetrics MetricsReport::mean_structured() const {
  std::vector<const MethodMetrics*> ms;
  for (const auto& r : rows) ms.push_back(&r.structured);
  return mean_of(ms);
}

MethodMetrics MetricsReport::mean_baseline() const {
  std::vector<const MethodMetrics*> ms;
  for (const auto& r : rows) ms.push_back(&r.baseline);
  return mean_of(ms);
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  j["v"] = 1;
  j["participants"] = nlohmann::json::array();
  for (const auto& r : rows) {
    j["participants"].push_back({{"participant", r.participant},
                                 {"structured", method_json(r.structured)},
                                 {"baseline", method_json(r.baseline)}});
  }
  j["mean"] = {{"structured", method_json(mean_structured())},
               {"baseline", method_json(mean_baseline())}};
  return j;
}

std::string MetricsReport::to_text() const {
  std::ostringstream os;
  char head[256];
  std::snprintf(head, sizeof head, "%-12s %-10s %8s | %20s | %20s | %20s\n", "participant",
                "method", "dur err%", "action top-1/3/5", "short top-1/3/5", "long top-1/3/5");
  os << head;
  for (const auto& r : rows) {
    text_row(os, r.participant, "structured", r.structured);
    text_row(os, r.participant, "baseline", r.baseline);
  }
  if (!rows.empty()) {
    text_row(os, "mean", "structured", mean_structured());
    text_row(os, "mean", "baseline", mean_baseline());
  }
  return os.str();
}

ParticipantMetrics evaluate_participant(const AgentBundle& bundle, const Corpus& corpus,
                                        std::size_t log_index, const IntentionSet& set) {
  require(bundle.action, AgentKind::action, corpus);
  require(bundle.duration, AgentKind::duration, corpus);
  require(bundle.short_intention, AgentKind::short_intention, corpus);
  require(bundle.long_intention, AgentKind::long_intention, corpus);
  require(bundle.baseline, AgentKind::baseline_end_to_end, corpus);
  if (log_index >= corpus.logs.size()) throw Error("log index outside the corpus");
  const auto& log = corpus.logs[log_index];

  Tally s_act, s_short, s_long, b_act, b_short;
  double s_dur = 0.0, b_dur = 0.0;
  const auto long_k = std::min(kDefaultListSize, set.size());
  for (const auto& ref : corpus.test) {
    if (ref.log != log_index) continue;
    const auto t = ref.target;
    const auto row = log.rows.row(t);

    const auto& a = *bundle.action;
    s_act.add(position_of(rank_actions(predict_action(a, a.window(log.rows, t), a.query(row))),
                          log.actions[t]));
    const auto& d = *bundle.duration;
    s_dur += relative_error(predict_duration(d, d.window(log.rows, t), d.query(row)),
                            log.durations[t]);
    const auto& si = *bundle.short_intention;
    const auto sp = predict_short_intention(si, si.window(log.rows, t), si.query(row));
    s_short.add(position_of(set.rank(sp), log.intentions[t]));
    const auto& li = *bundle.long_intention;
    const auto lp = predict_long_intentions(li, li.window(log.rows, t), li.query(row), set, long_k);
    const auto long_gt = normalize_text(log.long_intentions[t]);
    std::size_t long_pos = lp.size();
    for (std::size_t i = 0; i < lp.size(); ++i) {
      if (lp[i].text == long_gt) {
        long_pos = i;
        break;
      }
    }
    s_long.add(long_pos);

    const auto& b = *bundle.baseline;
    const auto bp = baseline_predict(b, b.window(log.rows, t));
    b_act.add(position_of(rank_actions(bp.action_probs), log.actions[t]));
    b_dur += relative_error(bp.duration_min, log.durations[t]);
    b_short.add(position_of(set.rank(bp.intention), log.intentions[t]));
  }

  ParticipantMetrics out;
  out.participant = log.participant_id;
  const auto n = static_cast<double>(s_act.n);
  out.structured.samples = out.baseline.samples = s_act.n;
  out.structured.duration_error = s_act.n ? s_dur / n : 0.0;
  out.structured.action = s_act.rates();
  out.structured.short_intention = s_short.rates();
  out.structured.long_intention = s_long.rates();
  out.baseline.duration_error = s_act.n ? b_dur / n : 0.0;
  out.baseline.action = b_act.rates();
  out.baseline.short_intention = b_short.rates();
  return out;
}

}  // namespace lsti
