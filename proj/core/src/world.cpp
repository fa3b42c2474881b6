#include "lsti/world.hpp"

#include <algorithm>
#include <set>
#include <utility>

#include "lsti/error.hpp"
#include "lsti/hash.hpp"
#include "lsti/json_io.hpp"

namespace lsti {

namespace {

const std::vector<std::string> kNoneSchema{"none"};

template <typename Range>
int position_of(const Range& range, std::string_view value) {
  const auto it = std::find(range.begin(), range.end(), value);
  return it == range.end() ? -1 : static_cast<int>(it - range.begin());
}

}  // namespace

void WorldConfig::validate() const {
  if (rooms.size() != kRoomCount) {
    throw ConfigError("expected 6 rooms, got " + std::to_string(rooms.size()));
  }
  if (actions.size() != kActionCount) {
    throw ConfigError("expected 26 actions, got " + std::to_string(actions.size()));
  }
  if (std::set<std::string>(rooms.begin(), rooms.end()).size() != rooms.size()) {
    throw ConfigError("duplicate room identifier");
  }
  if (std::set<std::string>(actions.begin(), actions.end()).size() != actions.size()) {
    throw ConfigError("duplicate action identifier");
  }
  for (const auto& [id, states] : state_schemas) {
    if (states.empty() || states.size() > kMaxSchemaStates) {
      throw ConfigError("state schema '" + id + "' must have 1-8 states");
    }
  }
  std::set<std::string> seen;
  for (const auto& obj : objects) {
    if (obj.id.empty() || obj.id == kNoObject) {
      throw ConfigError("object id '" + obj.id + "' is reserved or empty");
    }
    if (!seen.insert(obj.id).second) throw ConfigError("duplicate object id '" + obj.id + "'");
    const auto schema = state_schemas.find(obj.schema);
    if (schema == state_schemas.end()) {
      throw ConfigError("object '" + obj.id + "' references unknown schema '" + obj.schema + "'");
    }
    if (position_of(schema->second, obj.initial_state) < 0) {
      throw ConfigError("object '" + obj.id + "' initial state '" + obj.initial_state +
                        "' not in schema '" + obj.schema + "'");
    }
    if (room_index(obj.home_room) < 0) {
      throw ConfigError("object '" + obj.id + "' has unknown home room '" + obj.home_room + "'");
    }
    if (obj.quantity && *obj.quantity < 0) {
      throw ConfigError("object '" + obj.id + "' has negative quantity");
    }
  }
}

std::string WorldConfig::fingerprint() const {
  const nlohmann::json j = *this;
  return hex64(fnv1a64(j.dump()));
}

int WorldConfig::action_index(std::string_view action) const { return position_of(actions, action); }

int WorldConfig::room_index(std::string_view room) const { return position_of(rooms, room); }

int WorldConfig::object_index(std::string_view object) const {
  if (object == kNoObject) return 0;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].id == object) return static_cast<int>(i) + 1;
  }
  return -1;
}

const ObjectDesc* WorldConfig::find_object(std::string_view object) const {
  const int idx = object_index(object);
  return idx > 0 ? &objects[static_cast<std::size_t>(idx) - 1] : nullptr;
}

const std::vector<std::string>& WorldConfig::schema_of(std::string_view object) const {
  const ObjectDesc* desc = find_object(object);
  if (desc == nullptr) return kNoneSchema;
  return state_schemas.at(desc->schema);
}

WorldConfig default_world_config(std::size_t object_count) {
  if (object_count < 1 || object_count > 206) {
    throw ConfigError("object_count must be in [1, 206]");
  }
  WorldConfig cfg;
  cfg.rooms = {"living room", "kitchen", "bathroom", "bedroom", "study", "hall"};
  cfg.actions = {"walk_to", "grab",  "put",  "open",  "close",   "turn_on", "turn_off",
                 "sit",     "stand", "lie",  "sleep", "eat",     "drink",   "cook",
                 "wash",    "clean", "read", "write", "watch",   "use",     "play",
                 "call",    "dress", "undress", "brush", "pour"};
  cfg.state_schemas = {
      {"device", {"off", "on"}},
      {"container", {"closed", "open"}},
      {"consumable", {"stocked", "depleted"}},
      {"item", {"stored", "in_use"}},
      {"furniture", {"free", "occupied"}},
  };
  struct Row {
    const char* id;
    const char* name;
    const char* room;
    const char* schema;
    int quantity;  // -1: not a counted object
  };
  static constexpr Row kCatalog[] = {
      {"stove", "Stove", "kitchen", "device", -1},
      {"oven", "Oven", "kitchen", "device", -1},
      {"fridge", "Fridge", "kitchen", "container", -1},
      {"microwave", "Microwave", "kitchen", "device", -1},
      {"kettle", "Kettle", "kitchen", "device", -1},
      {"coffee_machine", "Coffee machine", "kitchen", "device", -1},
      {"sink", "Sink", "kitchen", "device", -1},
      {"dishwasher", "Dishwasher", "kitchen", "device", -1},
      {"cupboard", "Cupboard", "kitchen", "container", -1},
      {"apple", "Apple", "kitchen", "consumable", 6},
      {"bread", "Bread", "kitchen", "consumable", 8},
      {"milk", "Milk", "kitchen", "consumable", 6},
      {"coffee_beans", "Coffee beans", "kitchen", "consumable", 20},
      {"pan", "Pan", "kitchen", "item", -1},
      {"plate", "Plate", "kitchen", "item", -1},
      {"cup", "Cup", "kitchen", "item", -1},
      {"tv", "TV", "living room", "device", -1},
      {"sofa", "Sofa", "living room", "furniture", -1},
      {"lamp", "Lamp", "living room", "device", -1},
      {"book", "Book", "living room", "item", -1},
      {"game_console", "Game console", "living room", "device", -1},
      {"phone", "Phone", "living room", "item", -1},
      {"vacuum_cleaner", "Vacuum cleaner", "living room", "device", -1},
      {"shower", "Shower", "bathroom", "device", -1},
      {"toothbrush", "Toothbrush", "bathroom", "item", -1},
      {"toilet", "Toilet", "bathroom", "furniture", -1},
      {"washing_machine", "Washing machine", "bathroom", "device", -1},
      {"towel", "Towel", "bathroom", "item", -1},
      {"bathtub", "Bathtub", "bathroom", "device", -1},
      {"bed", "Bed", "bedroom", "furniture", -1},
      {"wardrobe", "Wardrobe", "bedroom", "container", -1},
      {"alarm_clock", "Alarm clock", "bedroom", "device", -1},
      {"clothes", "Clothes", "bedroom", "item", -1},
      {"desk", "Desk", "study", "furniture", -1},
      {"computer", "Computer", "study", "device", -1},
      {"notebook", "Notebook", "study", "item", -1},
      {"pen", "Pen", "study", "item", -1},
      {"desk_lamp", "Desk lamp", "study", "device", -1},
      {"front_door", "Front door", "hall", "container", -1},
      {"keys", "Keys", "hall", "item", -1},
  };
  const std::size_t named = std::min(object_count, std::size(kCatalog));
  for (std::size_t i = 0; i < named; ++i) {
    const Row& r = kCatalog[i];
    ObjectDesc d{r.id, r.name, r.room, r.schema, cfg.state_schemas.at(r.schema).front(),
                 std::nullopt};
    if (r.quantity >= 0) d.quantity = r.quantity;
    cfg.objects.push_back(std::move(d));
  }
  for (std::size_t i = named; i < object_count; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "prop_%03zu", i + 1);
    cfg.objects.push_back(ObjectDesc{id, std::string("Prop ") + std::to_string(i + 1),
                                     cfg.rooms[i % kRoomCount], "item", "stored", std::nullopt});
  }
  return cfg;
}

WorldState init_world(const WorldConfig& config, Instant horizon_start) {
  config.validate();
  WorldState state;
  for (const auto& obj : config.objects) {
    const auto& schema = config.state_schemas.at(obj.schema);
    state.object_states[obj.id] =
        ObjectState{position_of(schema, obj.initial_state), obj.quantity.value_or(0)};
  }
  state.participant_room = "hall";
  state.clock = horizon_start;
  return state;
}

namespace {

// First vocabulary check that fails, if any.
std::optional<std::pair<std::string_view, std::string>> vocabulary_violation(
    const Observation& obs, const WorldConfig& config) {
  if (config.action_index(obs.action) < 0) {
    return std::pair{rule::kUnknownAction, "unknown action '" + obs.action + "'"};
  }
  if (config.object_index(obs.object_id) < 0) {
    return std::pair{rule::kUnknownObject, "unknown object '" + obs.object_id + "'"};
  }
  if (config.room_index(obs.room) < 0) {
    return std::pair{rule::kUnknownRoom, "unknown room '" + obs.room + "'"};
  }
  if (obs.duration_min < 0) {
    return std::pair{rule::kNegativeDuration,
                     "negative duration " + std::to_string(obs.duration_min)};
  }
  return std::nullopt;
}

bool state_in_schema(const Observation& obs, const WorldConfig& config) {
  const auto n = static_cast<int>(config.schema_of(obs.object_id).size());
  return obs.post_state.state >= 0 && obs.post_state.state < n && obs.post_state.quantity >= 0;
}

}  // namespace

WorldState apply_action(const WorldState& state, const Observation& obs,
                        const WorldConfig& config) {
  if (auto v = vocabulary_violation(obs, config)) {
    throw ValidationError(std::string(v->first), v->second);
  }
  if (!state_in_schema(obs, config)) {
    throw ValidationError(std::string(rule::kStateNotInSchema),
                          "post-state of '" + obs.object_id + "' outside its schema");
  }
  if (obs.start() < state.clock) {
    throw OrderingError("event at " + obs.start_date.to_string() + " " +
                        format_clock(obs.start_time) + " starts before the world clock");
  }
  WorldState next = state;
  if (obs.object_id != kNoObject) next.object_states[obs.object_id] = obs.post_state;
  next.participant_room = obs.room;
  next.clock = obs.end();
  return next;
}

ObjectState default_effect(const WorldConfig& config, const WorldState& state,
                           std::string_view action, std::string_view object) {
  const ObjectDesc* desc = config.find_object(object);
  if (desc == nullptr) return {};
  ObjectState current{};
  if (const auto it = state.object_states.find(desc->id); it != state.object_states.end()) {
    current = it->second;
  }
  const auto& schema = config.state_schemas.at(desc->schema);
  const bool consumes = action == "eat" || action == "drink" || action == "pour";
  if (desc->quantity && consumes) {
    ObjectState next = current;
    next.quantity = std::max(0, current.quantity - 1);
    const int depleted = position_of(schema, "depleted");
    const int stocked = position_of(schema, "stocked");
    if (next.quantity == 0 && depleted >= 0) next.state = depleted;
    if (next.quantity > 0 && stocked >= 0) next.state = stocked;
    return next;
  }
  static const std::map<std::string_view, std::vector<std::string_view>> kTargets = {
      {"turn_on", {"on"}},
      {"turn_off", {"off"}},
      {"open", {"open"}},
      {"close", {"closed"}},
      {"sit", {"occupied"}},
      {"lie", {"occupied"}},
      {"sleep", {"occupied"}},
      {"stand", {"free"}},
      {"put", {"stored", "closed"}},
      {"undress", {"stored"}},
      {"grab", {"in_use"}},
      {"use", {"in_use", "occupied"}},
      {"play", {"in_use", "on"}},
      {"read", {"in_use"}},
      {"write", {"in_use"}},
      {"call", {"in_use"}},
      {"brush", {"in_use"}},
      {"dress", {"in_use"}},
      {"cook", {"in_use", "on"}},
      {"drink", {"in_use"}},
      {"eat", {"in_use"}},
      {"wash", {"stored"}},
  };
  const auto it = kTargets.find(action);
  if (it == kTargets.end()) return current;
  for (auto target : it->second) {
    const int idx = position_of(schema, target);
    if (idx >= 0) return ObjectState{idx, current.quantity};
  }
  return current;
}

std::vector<Violation> validate_log(const ObservationLog& log, const WorldConfig& config) {
  std::vector<Violation> out;
  for (std::size_t i = 0; i < log.events.size(); ++i) {
    const Observation& ev = log.events[i];
    if (auto v = vocabulary_violation(ev, config)) {
      out.push_back({i, std::string(v->first), v->second});
    } else if (!state_in_schema(ev, config)) {
      out.push_back({i, std::string(rule::kStateNotInSchema),
                     "post-state of '" + ev.object_id + "' outside its schema"});
    }
    if (i == 0) continue;
    const Observation& prev = log.events[i - 1];
    if (ev.start() < prev.start()) {
      out.push_back({i, std::string(rule::kTimeRegression), "starts before previous event"});
    } else if (ev.start() < prev.start() + std::max(0, prev.duration_min)) {
      out.push_back({i, std::string(rule::kOverlap),
                     "overlaps previous event by " +
                         std::to_string(prev.end() - ev.start()) + " min"});
    }
  }
  return out;
}

std::pair<ObservationLog, SanitizeReport> sanitize_log(const ObservationLog& log,
                                                       const WorldConfig& config) {
  ObservationLog out = log;
  out.events.clear();
  SanitizeReport report;
  for (std::size_t i = 0; i < log.events.size(); ++i) {
    Observation ev = log.events[i];
    if (auto v = vocabulary_violation(ev, config)) {
      report.actions.push_back({i, "drop", std::string(v->first), v->second});
      continue;
    }
    if (!state_in_schema(ev, config)) {
      const auto n = static_cast<int>(config.schema_of(ev.object_id).size());
      ev.post_state.state = std::clamp(ev.post_state.state, 0, n - 1);
      ev.post_state.quantity = std::max(0, ev.post_state.quantity);
      report.actions.push_back({i, "clamp", std::string(rule::kStateNotInSchema),
                                "post-state clamped into schema"});
    }
    if (!out.events.empty()) {
      const Observation& prev = out.events.back();
      if (ev.start() < prev.end()) {
        const auto rule_id = ev.start() < prev.start() ? rule::kTimeRegression : rule::kOverlap;
        report.actions.push_back({i, "shift", std::string(rule_id),
                                  "start moved by " + std::to_string(prev.end() - ev.start()) +
                                      " min"});
        ev.set_start(prev.end());
      }
    }
    out.events.push_back(std::move(ev));
  }
  return {std::move(out), std::move(report)};
}

WorldState replay(const ObservationLog& log, const WorldConfig& config) {
  WorldState state = init_world(config, log.horizon_start());
  for (const auto& ev : log.events) state = apply_action(state, ev, config);
  return state;
}

}  // namespace lsti
