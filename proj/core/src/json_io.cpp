#include "lsti/json_io.hpp"

#include <fstream>
#include <sstream>

#include "lsti/error.hpp"

namespace lsti {

using nlohmann::json;

void to_json(json& j, const Date& d) { j = d.to_string(); }
void from_json(const json& j, Date& d) { d = Date::parse(j.get<std::string>()); }

void to_json(json& j, const ObjectDesc& o) {
  j = json{{"id", o.id},
           {"name", o.name},
           {"home_room", o.home_room},
           {"schema", o.schema},
           {"initial_state", o.initial_state}};
  if (o.quantity) j["quantity"] = *o.quantity;
}

void from_json(const json& j, ObjectDesc& o) {
  j.at("id").get_to(o.id);
  o.name = j.value("name", o.id);
  j.at("home_room").get_to(o.home_room);
  j.at("schema").get_to(o.schema);
  j.at("initial_state").get_to(o.initial_state);
  o.quantity.reset();
  if (j.contains("quantity") && !j["quantity"].is_null()) o.quantity = j["quantity"].get<int>();
}

void to_json(json& j, const WorldConfig& c) {
  j = json{{"v", kSchemaVersion},
           {"rooms", c.rooms},
           {"actions", c.actions},
           {"state_schemas", c.state_schemas},
           {"objects", c.objects}};
}

void from_json(const json& j, WorldConfig& c) {
  j.at("rooms").get_to(c.rooms);
  j.at("actions").get_to(c.actions);
  j.at("state_schemas").get_to(c.state_schemas);
  j.at("objects").get_to(c.objects);
}

void to_json(json& j, const ObjectState& s) { j = json{{"state", s.state}, {"quantity", s.quantity}}; }

void from_json(const json& j, ObjectState& s) {
  j.at("state").get_to(s.state);
  s.quantity = j.value("quantity", 0);
}

void to_json(json& j, const WorldState& s) {
  j = json{{"object_states", s.object_states},
           {"participant_room", s.participant_room},
           {"clock", {{"date", instant_date(s.clock)}, {"minute", instant_minute(s.clock)}}}};
}

void from_json(const json& j, WorldState& s) {
  j.at("object_states").get_to(s.object_states);
  j.at("participant_room").get_to(s.participant_room);
  const auto& clock = j.at("clock");
  s.clock = make_instant(clock.at("date").get<Date>(), clock.at("minute").get<int>());
}

void to_json(json& j, const Observation& o) {
  j = json{{"participant_id", o.participant_id},
           {"action", o.action},
           {"start_date", o.start_date},
           {"start_time", o.start_time},
           {"weekday", o.weekday()},
           {"duration_min", o.duration_min},
           {"object_id", o.object_id},
           {"post_state", o.post_state},
           {"room", o.room},
           {"intention", o.intention}};
}

void from_json(const json& j, Observation& o) {
  o.participant_id = j.value("participant_id", std::string{});
  j.at("action").get_to(o.action);
  j.at("start_date").get_to(o.start_date);
  j.at("start_time").get_to(o.start_time);
  j.at("duration_min").get_to(o.duration_min);
  o.object_id = j.value("object_id", std::string(kNoObject));
  o.post_state = j.contains("post_state") ? j["post_state"].get<ObjectState>() : ObjectState{};
  j.at("room").get_to(o.room);
  o.intention = j.value("intention", std::string{});
}

namespace {

json log_header(const ObservationLog& log) {
  return json{{"v", kSchemaVersion},
              {"participant_id", log.participant_id},
              {"config_fingerprint", log.config_fingerprint},
              {"start_date", log.start_date},
              {"days", log.days}};
}

void read_log_header(const json& j, ObservationLog& log) {
  log.participant_id = j.value("participant_id", std::string{});
  log.config_fingerprint = j.value("config_fingerprint", std::string{});
  j.at("start_date").get_to(log.start_date);
  log.days = j.value("days", 1);
}

}  // namespace

void to_json(json& j, const ObservationLog& log) {
  j = log_header(log);
  j["events"] = log.events;
}

void from_json(const json& j, ObservationLog& log) {
  read_log_header(j, log);
  j.at("events").get_to(log.events);
}

void to_json(json& j, const Violation& v) {
  j = json{{"index", v.index}, {"rule", v.rule}, {"detail", v.detail}};
}

void to_json(json& j, const SanitizeAction& a) {
  j = json{{"index", a.index}, {"fix", a.fix}, {"rule", a.rule}, {"detail", a.detail}};
}

void to_json(json& j, const PostSpec& p) {
  j = json::object();
  if (p.state) j["state"] = *p.state;
  if (p.quantity_delta != 0) j["quantity_delta"] = p.quantity_delta;
}

void from_json(const json& j, PostSpec& p) {
  p.state.reset();
  if (j.contains("state")) p.state = j["state"].get<std::string>();
  p.quantity_delta = j.value("quantity_delta", 0);
}

void to_json(json& j, const RecipeStep& s) {
  j = json{{"action", s.action},
           {"object", s.object},
           {"duration_min", s.duration_min},
           {"room", s.room}};
  if (s.post) j["post"] = *s.post;
}

void from_json(const json& j, RecipeStep& s) {
  j.at("action").get_to(s.action);
  s.object = j.value("object", std::string(kNoObject));
  j.at("duration_min").get_to(s.duration_min);
  j.at("room").get_to(s.room);
  s.post.reset();
  if (j.contains("post")) s.post = j["post"].get<PostSpec>();
}

void to_json(json& j, const RoutineEntry& e) {
  j = json{{"weekdays", e.weekdays},
           {"nominal_start", format_clock(e.nominal_start)},
           {"intention", e.intention},
           {"recipe", e.recipe}};
}

void from_json(const json& j, RoutineEntry& e) {
  j.at("weekdays").get_to(e.weekdays);
  const auto& start = j.at("nominal_start");
  if (start.is_number_integer()) {
    e.nominal_start = start.get<int>();
  } else {
    int h = 0, m = 0;
    if (std::sscanf(start.get<std::string>().c_str(), "%d:%d", &h, &m) != 2) {
      throw FormatError("nominal_start must be HH:MM");
    }
    e.nominal_start = h * 60 + m;
  }
  j.at("intention").get_to(e.intention);
  j.at("recipe").get_to(e.recipe);
}

void to_json(json& j, const Persona& p) {
  j = json{{"id", p.id},
           {"routine", p.routine},
           {"mistake_rate", p.mistake_rate},
           {"jitter_sigma_min", p.jitter_sigma_min}};
}

void from_json(const json& j, Persona& p) {
  j.at("id").get_to(p.id);
  j.at("routine").get_to(p.routine);
  p.mistake_rate = j.value("mistake_rate", 0.0);
  p.jitter_sigma_min = j.value("jitter_sigma_min", 0.0);
}

void to_json(json& j, const ConflictLabel& l) {
  j = json{{"event_index", l.event_index},
           {"expected_long_intention", l.expected_long_intention},
           {"actual_short_intention", l.actual_short_intention},
           {"is_conflict", l.is_conflict ? 1 : 0}};
}

void from_json(const json& j, ConflictLabel& l) {
  j.at("event_index").get_to(l.event_index);
  j.at("expected_long_intention").get_to(l.expected_long_intention);
  j.at("actual_short_intention").get_to(l.actual_short_intention);
  l.is_conflict = j.at("is_conflict").get<int>() != 0;
}

void to_json(json& j, const ConflictGroundTruth& gt) {
  j = json{{"v", kSchemaVersion}, {"participant_id", gt.participant_id}, {"labels", gt.labels}};
}

void from_json(const json& j, ConflictGroundTruth& gt) {
  gt.participant_id = j.value("participant_id", std::string{});
  j.at("labels").get_to(gt.labels);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  write_file(path, j.dump(2) + "\n");
}

WorldConfig load_world_config(const std::filesystem::path& path) {
  try {
    auto cfg = read_json(path).get<WorldConfig>();
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<Persona> load_personas(const std::filesystem::path& path) {
  try {
    const json j = read_json(path);
    return (j.is_array() ? j : j.at("personas")).get<std::vector<Persona>>();
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_personas(const std::filesystem::path& path, const std::vector<Persona>& personas) {
  write_json(path, json{{"v", kSchemaVersion}, {"personas", personas}});
}

std::string log_to_jsonl(const ObservationLog& log) {
  std::string out = json{{"header", log_header(log)}}.dump() + "\n";
  for (const auto& ev : log.events) out += json(ev).dump() + "\n";
  return out;
}

ObservationLog log_from_jsonl(const std::string& text) {
  ObservationLog log;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const json j = json::parse(line);
      if (j.contains("header")) {
        read_log_header(j["header"], log);
      } else {
        log.events.push_back(j.get<Observation>());
      }
    }
  } catch (const json::exception& e) {
    throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
  }
  return log;
}

ObservationLog load_log(const std::filesystem::path& path) {
  if (path.extension() == ".jsonl") {
    try {
      return log_from_jsonl(read_file(path));
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
  }
  try {
    return read_json(path).get<ObservationLog>();
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_log(const std::filesystem::path& path, const ObservationLog& log) {
  if (path.extension() == ".jsonl") {
    write_file(path, log_to_jsonl(log));
  } else {
    write_json(path, json(log));
  }
}

}  // namespace lsti
