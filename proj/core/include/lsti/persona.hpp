#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lsti/world.hpp"

namespace lsti {

/// Intention label of the idle activity that fills gaps between routines.
inline constexpr std::string_view kFillerIntention = "relax";
/// Gaps shorter than this are left empty.
inline constexpr int kMinFillerGapMin = 10;

/// Explicit post-state for a recipe step. With neither field set the
/// action's default effect applies.
struct PostSpec {
  std::optional<std::string> state;
  int quantity_delta = 0;

  bool operator==(const PostSpec&) const = default;
};

struct RecipeStep {
  std::string action;
  std::string object{kNoObject};
  int duration_min = 1;
  std::string room;
  std::optional<PostSpec> post;

  bool operator==(const RecipeStep&) const = default;
};

struct RoutineEntry {
  std::vector<int> weekdays;  // 0 = Monday
  int nominal_start = 0;      // minutes since midnight
  std::string intention;
  std::vector<RecipeStep> recipe;

  bool operator==(const RoutineEntry&) const = default;

  int nominal_duration() const;
  bool on_weekday(int wd) const;
};

struct Persona {
  std::string id;
  std::vector<RoutineEntry> routine;
  double mistake_rate = 0.0;
  double jitter_sigma_min = 0.0;

  bool operator==(const Persona&) const = default;

  /// Throws ConfigError for empty routines, overlapping nominal slots, rates
  /// outside [0,1] or recipe references missing from the config.
  void validate(const WorldConfig& config) const;
  /// Distinct routine intentions, in first-appearance order.
  std::vector<std::string> intentions() const;
};

struct ConflictLabel {
  std::size_t event_index = 0;
  std::string expected_long_intention;
  std::string actual_short_intention;
  bool is_conflict = false;

  bool operator==(const ConflictLabel&) const = default;
};

/// One label per event of the companion log.
struct ConflictGroundTruth {
  std::string participant_id;
  std::vector<ConflictLabel> labels;

  bool operator==(const ConflictGroundTruth&) const = default;
  std::size_t conflict_count() const;
};

inline const Date kDefaultStartDate{2024, 1, 1};

/// Seeded realization of the persona's routine over `days` days: starts
/// jittered by a normal draw truncated at +-3 sigma, recipes laid out
/// back-to-back, gaps of 10+ minutes filled with an idle "relax" activity.
ObservationLog generate_log(const Persona& persona, const WorldConfig& config, int days,
                            std::uint64_t seed, Date start_date = kDefaultStartDate);

/// Replaces each routine occurrence, with probability `mistake_rate`, by the
/// recipe of a dissimilar persona activity and labels the events. The
/// substitute is drawn uniformly from the least similar half (by intention
/// embedding) of the persona's other intentions.
std::pair<ObservationLog, ConflictGroundTruth> inject_conflicts(const ObservationLog& log,
                                                                const Persona& persona,
                                                                const WorldConfig& config,
                                                                std::uint64_t seed);

/// Long-term targets for logs without a generator schedule: intentions that
/// recur at least 3 times within +-60 min of the same time of day form the
/// schedule, and each event expects the scheduled intention nearest in time.
ConflictGroundTruth mine_ground_truth(const ObservationLog& log);

struct SplitRatios {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
};

/// [0, train_end) / [train_end, val_end) / [val_end, n).
struct SplitBounds {
  std::size_t train_end = 0;
  std::size_t val_end = 0;
  std::size_t n = 0;
};

SplitBounds split_bounds(std::size_t n, const SplitRatios& ratios = {});

struct DatasetSplit {
  ObservationLog train;
  ObservationLog val;
  ObservationLog test;
};

/// Chronological split with sizes floor(0.7n) / floor(0.1n) / remainder.
DatasetSplit split_dataset(const ObservationLog& log, const SplitRatios& ratios = {});

/// The eight shipped fixture participants P01-P08.
std::vector<Persona> standard_personas();
/// Zero-jitter, zero-mistake persona with a full weekly routine.
Persona deterministic_persona();

}  // namespace lsti
