#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lsti/calendar.hpp"

namespace lsti {

inline constexpr std::size_t kRoomCount = 6;
inline constexpr std::size_t kActionCount = 26;
inline constexpr std::size_t kMaxSchemaStates = 8;
/// Pseudo-object for actions that touch nothing (e.g. sleep). Index 0.
inline constexpr std::string_view kNoObject = "none";

struct ObjectDesc {
  std::string id;
  std::string name;
  std::string home_room;
  std::string schema;
  std::string initial_state;
  std::optional<int> quantity;

  bool operator==(const ObjectDesc&) const = default;
};

/// Static household description: rooms, object catalog, action vocabulary and
/// per-class state schemas.
struct WorldConfig {
  std::vector<std::string> rooms;
  std::vector<ObjectDesc> objects;
  std::vector<std::string> actions;
  std::map<std::string, std::vector<std::string>> state_schemas;

  bool operator==(const WorldConfig&) const = default;

  /// Throws ConfigError naming the first offending entry.
  void validate() const;
  /// FNV-1a 64 of the canonical JSON form, as 16 hex digits.
  std::string fingerprint() const;

  /// -1 when unknown.
  int action_index(std::string_view action) const;
  int room_index(std::string_view room) const;
  /// 0 for "none", 1 + registry position otherwise, -1 when unknown.
  int object_index(std::string_view object) const;
  const ObjectDesc* find_object(std::string_view object) const;
  /// State names of the object's schema; {"none"} for the pseudo-object.
  const std::vector<std::string>& schema_of(std::string_view object) const;
  /// Number of encodable objects, including the pseudo-object.
  std::size_t object_slots() const { return objects.size() + 1; }
};

/// The fixed 6-room, 26-action household with a catalog of `object_count`
/// objects (40 hand-named ones, padded with generic props up to 206).
WorldConfig default_world_config(std::size_t object_count = 40);

struct ObjectState {
  int state = 0;
  int quantity = 0;

  auto operator<=>(const ObjectState&) const = default;
};

struct WorldState {
  std::map<std::string, ObjectState> object_states;
  std::string participant_room;
  Instant clock = 0;

  bool operator==(const WorldState&) const = default;
};

struct Observation {
  std::string participant_id;
  std::string action;
  Date start_date;
  int start_time = 0;  // minutes since midnight
  int duration_min = 0;
  std::string object_id{kNoObject};
  ObjectState post_state;
  std::string room;
  std::string intention;

  bool operator==(const Observation&) const = default;

  int weekday() const { return start_date.weekday(); }
  Instant start() const { return make_instant(start_date, start_time); }
  Instant end() const { return start() + duration_min; }
  void set_start(Instant t) {
    start_date = instant_date(t);
    start_time = instant_minute(t);
  }
};

struct ObservationLog {
  std::string participant_id;
  std::string config_fingerprint;
  Date start_date;
  int days = 1;
  std::vector<Observation> events;

  bool operator==(const ObservationLog&) const = default;

  Instant horizon_start() const { return make_instant(start_date, 0); }
  std::size_t size() const { return events.size(); }
};

/// Stable rule ids used by validate_log / sanitize_log and API errors.
namespace rule {
inline constexpr std::string_view kUnknownAction = "unknown-action";
inline constexpr std::string_view kUnknownObject = "unknown-object";
inline constexpr std::string_view kUnknownRoom = "unknown-room";
inline constexpr std::string_view kNegativeDuration = "negative-duration";
inline constexpr std::string_view kOverlap = "overlap";
inline constexpr std::string_view kStateNotInSchema = "state-not-in-schema";
inline constexpr std::string_view kTimeRegression = "time-regression";
}  // namespace rule

struct Violation {
  std::size_t index = 0;
  std::string rule;
  std::string detail;

  bool operator==(const Violation&) const = default;
};

struct SanitizeAction {
  std::size_t index = 0;  // position in the input log
  std::string fix;        // "clamp", "shift" or "drop"
  std::string rule;
  std::string detail;

  bool operator==(const SanitizeAction&) const = default;
};

struct SanitizeReport {
  std::vector<SanitizeAction> actions;
  bool empty() const { return actions.empty(); }
};

/// All objects at their initial states, participant in the hall, clock at
/// `horizon_start`.
WorldState init_world(const WorldConfig& config, Instant horizon_start = 0);

/// Pure transition. Throws ValidationError for unknown vocabulary and
/// OrderingError when the observation starts before `state.clock`.
WorldState apply_action(const WorldState& state, const Observation& obs,
                        const WorldConfig& config);

/// Post-state an action would leave on its object when none is given
/// explicitly: turn_on -> "on", open -> "open", eat/drink/pour consume one
/// unit, sit/lie/sleep occupy, and so on. Unchanged when the schema has no
/// matching state.
ObjectState default_effect(const WorldConfig& config, const WorldState& state,
                           std::string_view action, std::string_view object);

std::vector<Violation> validate_log(const ObservationLog& log, const WorldConfig& config);

/// Applies, per event: drop (unknown action/object/room, negative duration),
/// clamp of the post-state into its schema, shift of the start to the end of
/// the previous kept event. The result always validates clean.
std::pair<ObservationLog, SanitizeReport> sanitize_log(const ObservationLog& log,
                                                       const WorldConfig& config);

/// Folds apply_action over the log from init_world.
WorldState replay(const ObservationLog& log, const WorldConfig& config);

}  // namespace lsti
