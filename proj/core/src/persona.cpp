#include "lsti/persona.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "lsti/encoding.hpp"
#include "lsti/error.hpp"

namespace lsti {

int RoutineEntry::nominal_duration() const {
  int total = 0;
  for (const auto& step : recipe) total += step.duration_min;
  return total;
}

bool RoutineEntry::on_weekday(int wd) const {
  return std::find(weekdays.begin(), weekdays.end(), wd) != weekdays.end();
}

std::size_t ConflictGroundTruth::conflict_count() const {
  return static_cast<std::size_t>(
      std::count_if(labels.begin(), labels.end(), [](const auto& l) { return l.is_conflict; }));
}

std::vector<std::string> Persona::intentions() const {
  std::vector<std::string> out;
  for (const auto& e : routine) {
    if (std::find(out.begin(), out.end(), e.intention) == out.end()) out.push_back(e.intention);
  }
  return out;
}

void Persona::validate(const WorldConfig& config) const {
  const std::string where = "persona '" + id + "': ";
  if (routine.empty()) throw ConfigError(where + "routine is empty");
  if (!(mistake_rate >= 0.0 && mistake_rate <= 1.0)) {
    throw ConfigError(where + "mistake_rate must be in [0,1]");
  }
  if (!(jitter_sigma_min >= 0.0)) throw ConfigError(where + "jitter must be non-negative");
  for (const auto& e : routine) {
    const std::string entry = where + "routine '" + e.intention + "': ";
    if (e.intention.empty()) throw ConfigError(where + "routine entry without intention");
    if (e.intention == kFillerIntention) {
      throw ConfigError(entry + "intention is reserved for filler activities");
    }
    if (e.weekdays.empty()) throw ConfigError(entry + "no weekdays");
    for (int wd : e.weekdays) {
      if (wd < 0 || wd > 6) throw ConfigError(entry + "weekday out of range");
    }
    if (e.nominal_start < 0 || e.nominal_start >= kMinutesPerDay) {
      throw ConfigError(entry + "nominal start out of range");
    }
    if (e.recipe.empty()) throw ConfigError(entry + "recipe is empty");
    for (const auto& step : e.recipe) {
      if (config.action_index(step.action) < 0) {
        throw ConfigError(entry + "recipe references unknown action '" + step.action + "'");
      }
      if (config.object_index(step.object) < 0) {
        throw ConfigError(entry + "recipe references unknown object '" + step.object + "'");
      }
      if (config.room_index(step.room) < 0) {
        throw ConfigError(entry + "recipe references unknown room '" + step.room + "'");
      }
      if (step.duration_min <= 0) throw ConfigError(entry + "recipe step needs a positive duration");
      if (step.post && step.post->state) {
        const auto& schema = config.schema_of(step.object);
        if (std::find(schema.begin(), schema.end(), *step.post->state) == schema.end()) {
          throw ConfigError(entry + "post-state '" + *step.post->state + "' not in schema of '" +
                            step.object + "'");
        }
      }
    }
  }
  // Nominal slots of one day (plus whatever spills over from the day
  // before) must not overlap.
  for (int wd = 0; wd < 7; ++wd) {
    std::vector<std::pair<int, int>> slots;  // [start, end) in minutes of day wd
    for (const auto& e : routine) {
      if (e.on_weekday(wd)) slots.emplace_back(e.nominal_start, e.nominal_start + e.nominal_duration());
      if (e.on_weekday((wd + 6) % 7) && e.nominal_start + e.nominal_duration() > kMinutesPerDay) {
        slots.emplace_back(-kMinutesPerDay, e.nominal_start + e.nominal_duration() - kMinutesPerDay);
      }
    }
    std::sort(slots.begin(), slots.end());
    for (std::size_t i = 1; i < slots.size(); ++i) {
      if (slots[i].first < slots[i - 1].second) {
        throw ConfigError(where + "routine entries overlap at nominal times on weekday " +
                          std::to_string(wd));
      }
    }
  }
}

namespace {

struct Occurrence {
  std::size_t entry = 0;
  Instant start = 0;
  std::optional<std::size_t> substitute;
};

class Realizer {
 public:
  Realizer(const Persona& persona, const WorldConfig& config, Date start_date, int days)
      : persona_(persona), config_(config) {
    log_.participant_id = persona.id;
    log_.config_fingerprint = config.fingerprint();
    log_.start_date = start_date;
    log_.days = days;
    state_ = init_world(config, log_.horizon_start());
  }

  std::pair<ObservationLog, ConflictGroundTruth> run(const std::vector<Occurrence>& occs) {
    gt_.participant_id = persona_.id;
    // Jitter may pull the first occurrence before the horizon; it starts at 00:00 then.
    Instant cursor = occs.empty() ? log_.horizon_start()
                                  : std::max(log_.horizon_start(), occs.front().start);
    for (const auto& occ : occs) {
      const Instant start = std::max(occ.start, cursor);
      if (start - cursor >= kMinFillerGapMin) filler(cursor, start - cursor);
      const RoutineEntry& scheduled = persona_.routine[occ.entry];
      const RoutineEntry& realized = persona_.routine[occ.substitute.value_or(occ.entry)];
      Instant t = start;
      for (const auto& step : realized.recipe) {
        Observation obs = base_observation(t, step.action, step.object, step.room,
                                           step.duration_min, realized.intention);
        obs.post_state = post_state(step);
        emit(std::move(obs), scheduled.intention, occ.substitute.has_value());
        t += step.duration_min;
      }
      cursor = t;
    }
    const Instant horizon_end = log_.horizon_start() + static_cast<Instant>(log_.days) * kMinutesPerDay;
    if (horizon_end - cursor >= kMinFillerGapMin) filler(cursor, horizon_end - cursor);
    return {std::move(log_), std::move(gt_)};
  }

 private:
  Observation base_observation(Instant t, const std::string& action, const std::string& object,
                               const std::string& room, int duration,
                               const std::string& intention) const {
    Observation obs;
    obs.participant_id = persona_.id;
    obs.action = action;
    obs.set_start(t);
    obs.duration_min = duration;
    obs.object_id = object;
    obs.room = room;
    obs.intention = intention;
    return obs;
  }

  void filler(Instant t, Instant duration) {
    Observation obs = base_observation(t, "sit", "sofa", "living room", static_cast<int>(duration),
                                       std::string(kFillerIntention));
    obs.post_state = default_effect(config_, state_, obs.action, obs.object_id);
    emit(std::move(obs), std::string(kFillerIntention), false);
  }

  ObjectState post_state(const RecipeStep& step) const {
    if (!step.post) return default_effect(config_, state_, step.action, step.object);
    ObjectState current{};
    if (const auto it = state_.object_states.find(step.object); it != state_.object_states.end()) {
      current = it->second;
    }
    const auto& schema = config_.schema_of(step.object);
    ObjectState next = current;
    next.quantity = std::max(0, current.quantity + step.post->quantity_delta);
    if (step.post->state) {
      next.state = static_cast<int>(
          std::find(schema.begin(), schema.end(), *step.post->state) - schema.begin());
    } else if (step.post->quantity_delta != 0) {
      const auto stocked = std::find(schema.begin(), schema.end(), "stocked");
      const auto depleted = std::find(schema.begin(), schema.end(), "depleted");
      if (stocked != schema.end() && depleted != schema.end()) {
        next.state = static_cast<int>((next.quantity > 0 ? stocked : depleted) - schema.begin());
      }
    }
    return next;
  }

  void emit(Observation obs, const std::string& expected, bool conflict) {
    state_ = apply_action(state_, obs, config_);
    gt_.labels.push_back({log_.events.size(), expected, obs.intention, conflict});
    log_.events.push_back(std::move(obs));
  }

  const Persona& persona_;
  const WorldConfig& config_;
  ObservationLog log_;
  ConflictGroundTruth gt_;
  WorldState state_;
};

int truncated_jitter(std::mt19937_64& rng, double sigma) {
  if (sigma <= 0.0) return 0;
  std::normal_distribution<double> normal(0.0, sigma);
  double draw = normal(rng);
  while (std::abs(draw) > 3.0 * sigma) draw = normal(rng);
  return static_cast<int>(std::lround(draw));
}

// Recovers routine occurrences from a realized log. Filler events are
// skipped; every other event must start a run matching some routine recipe.
std::vector<Occurrence> segment(const ObservationLog& log, const Persona& persona,
                                ConflictGroundTruth& labels) {
  std::vector<Occurrence> occs;
  labels.participant_id = log.participant_id;
  std::size_t i = 0;
  while (i < log.events.size()) {
    const Observation& ev = log.events[i];
    if (ev.intention == kFillerIntention) {
      labels.labels.push_back({i, ev.intention, ev.intention, false});
      ++i;
      continue;
    }
    std::optional<std::size_t> match;
    for (std::size_t e = 0; e < persona.routine.size() && !match; ++e) {
      const RoutineEntry& entry = persona.routine[e];
      if (entry.intention != ev.intention || i + entry.recipe.size() > log.events.size()) continue;
      bool same = true;
      for (std::size_t s = 0; s < entry.recipe.size() && same; ++s) {
        const Observation& o = log.events[i + s];
        const RecipeStep& step = entry.recipe[s];
        same = o.intention == entry.intention && o.action == step.action &&
               o.object_id == step.object && o.room == step.room;
      }
      if (same) match = e;
    }
    if (!match) {
      throw FormatError("event " + std::to_string(i) + " does not match any routine of persona '" +
                        persona.id + "'");
    }
    occs.push_back({*match, ev.start(), std::nullopt});
    for (std::size_t s = 0; s < persona.routine[*match].recipe.size(); ++s) {
      labels.labels.push_back({i + s, ev.intention, ev.intention, false});
    }
    i += persona.routine[*match].recipe.size();
  }
  return occs;
}

}  // namespace

ObservationLog generate_log(const Persona& persona, const WorldConfig& config, int days,
                            std::uint64_t seed, Date start_date) {
  if (days < 1) throw Error("days must be at least 1");
  config.validate();
  persona.validate(config);
  std::mt19937_64 rng(seed);
  std::vector<Occurrence> occs;
  std::vector<std::size_t> order(persona.routine.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return persona.routine[a].nominal_start < persona.routine[b].nominal_start;
  });
  for (int d = 0; d < days; ++d) {
    const Date date = start_date.plus_days(d);
    const int wd = date.weekday();
    for (std::size_t e : order) {
      const RoutineEntry& entry = persona.routine[e];
      if (!entry.on_weekday(wd)) continue;
      const int jitter = truncated_jitter(rng, persona.jitter_sigma_min);
      occs.push_back({e, make_instant(date, entry.nominal_start) + jitter, std::nullopt});
    }
  }
  std::stable_sort(occs.begin(), occs.end(),
                   [](const Occurrence& a, const Occurrence& b) { return a.start < b.start; });
  return Realizer(persona, config, start_date, days).run(occs).first;
}

std::pair<ObservationLog, ConflictGroundTruth> inject_conflicts(const ObservationLog& log,
                                                                const Persona& persona,
                                                                const WorldConfig& config,
                                                                std::uint64_t seed) {
  persona.validate(config);
  if (log.config_fingerprint != config.fingerprint()) {
    throw ConfigError("log fingerprint does not match the world config");
  }
  const auto intentions = persona.intentions();
  if (persona.mistake_rate > 0.0 && intentions.size() < 2) {
    throw ConfigError("persona '" + persona.id +
                      "' needs at least 2 distinct intentions to inject mistakes");
  }
  ConflictGroundTruth identity;
  std::vector<Occurrence> occs = segment(log, persona, identity);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  bool any = false;
  for (auto& occ : occs) {
    if (!(unit(rng) < persona.mistake_rate)) continue;
    const std::string& scheduled = persona.routine[occ.entry].intention;
    const Embedding anchor = embed_intention(scheduled);
    std::vector<std::pair<double, std::string>> candidates;
    for (const auto& text : intentions) {
      if (text != scheduled) candidates.emplace_back(cosine(anchor, embed_intention(text)), text);
    }
    std::sort(candidates.begin(), candidates.end());
    const std::size_t pool = (candidates.size() + 1) / 2;
    std::uniform_int_distribution<std::size_t> pick(0, pool - 1);
    const std::string& chosen = candidates[pick(rng)].second;
    for (std::size_t e = 0; e < persona.routine.size(); ++e) {
      if (persona.routine[e].intention == chosen) {
        occ.substitute = e;
        break;
      }
    }
    any = true;
  }
  if (!any) return {log, std::move(identity)};
  return Realizer(persona, config, log.start_date, log.days).run(occs);
}

namespace {

int circular_distance(int a, int b) {
  const int d = std::abs(a - b) % kMinutesPerDay;
  return std::min(d, kMinutesPerDay - d);
}

}  // namespace

ConflictGroundTruth mine_ground_truth(const ObservationLog& log) {
  constexpr int kWindowMin = 60;
  constexpr int kMinRecurrences = 3;
  struct Run {
    std::size_t begin;
    std::size_t end;
    int minute;
    std::string intention;
  };
  std::vector<Run> runs;
  for (std::size_t i = 0; i < log.events.size(); ++i) {
    const auto& ev = log.events[i];
    if (!runs.empty() && runs.back().intention == ev.intention && runs.back().end == i) {
      runs.back().end = i + 1;
    } else {
      runs.push_back({i, i + 1, ev.start_time, ev.intention});
    }
  }
  std::vector<bool> routine(runs.size(), false);
  for (std::size_t r = 0; r < runs.size(); ++r) {
    int count = 0;
    for (const auto& other : runs) {
      if (other.intention == runs[r].intention &&
          circular_distance(other.minute, runs[r].minute) <= kWindowMin) {
        ++count;
      }
    }
    routine[r] = !runs[r].intention.empty() && count >= kMinRecurrences;
  }
  ConflictGroundTruth gt;
  gt.participant_id = log.participant_id;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    std::string expected = runs[r].intention;
    if (!routine[r]) {
      int best = kWindowMin + 1;
      for (std::size_t s = 0; s < runs.size(); ++s) {
        if (!routine[s]) continue;
        const int d = circular_distance(runs[s].minute, runs[r].minute);
        if (d < best || (d == best && runs[s].intention < expected)) {
          best = d;
          expected = runs[s].intention;
        }
      }
    }
    for (std::size_t i = runs[r].begin; i < runs[r].end; ++i) {
      gt.labels.push_back({i, expected, runs[r].intention, expected != runs[r].intention});
    }
  }
  return gt;
}

SplitBounds split_bounds(std::size_t n, const SplitRatios& ratios) {
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw Error("split ratios must be non-negative and sum to 1");
  }
  const auto floor_of = [n](double r) {
    return static_cast<std::size_t>(std::floor(r * static_cast<double>(n) + 1e-9));
  };
  SplitBounds b;
  b.n = n;
  b.train_end = floor_of(ratios.train);
  b.val_end = b.train_end + floor_of(ratios.val);
  return b;
}

DatasetSplit split_dataset(const ObservationLog& log, const SplitRatios& ratios) {
  if (log.events.empty()) throw Error("cannot split an empty log");
  const SplitBounds b = split_bounds(log.events.size(), ratios);
  const auto slice = [&](std::size_t from, std::size_t to) {
    ObservationLog part = log;
    part.events.assign(log.events.begin() + static_cast<std::ptrdiff_t>(from),
                       log.events.begin() + static_cast<std::ptrdiff_t>(to));
    return part;
  };
  return {slice(0, b.train_end), slice(b.train_end, b.val_end), slice(b.val_end, b.n)};
}

}  // namespace lsti
