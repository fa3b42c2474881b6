#pragma once

// JSON mappings for the domain types plus small file helpers. Every
// top-level document carries "v": 1.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "lsti/persona.hpp"
#include "lsti/world.hpp"

namespace lsti {

inline constexpr int kSchemaVersion = 1;

void to_json(nlohmann::json& j, const Date& d);
void from_json(const nlohmann::json& j, Date& d);
void to_json(nlohmann::json& j, const ObjectDesc& o);
void from_json(const nlohmann::json& j, ObjectDesc& o);
void to_json(nlohmann::json& j, const WorldConfig& c);
void from_json(const nlohmann::json& j, WorldConfig& c);
void to_json(nlohmann::json& j, const ObjectState& s);
void from_json(const nlohmann::json& j, ObjectState& s);
void to_json(nlohmann::json& j, const WorldState& s);
void from_json(const nlohmann::json& j, WorldState& s);
void to_json(nlohmann::json& j, const Observation& o);
void from_json(const nlohmann::json& j, Observation& o);
void to_json(nlohmann::json& j, const ObservationLog& log);
void from_json(const nlohmann::json& j, ObservationLog& log);
void to_json(nlohmann::json& j, const Violation& v);
void to_json(nlohmann::json& j, const SanitizeAction& a);
void to_json(nlohmann::json& j, const PostSpec& p);
void from_json(const nlohmann::json& j, PostSpec& p);
void to_json(nlohmann::json& j, const RecipeStep& s);
void from_json(const nlohmann::json& j, RecipeStep& s);
void to_json(nlohmann::json& j, const RoutineEntry& e);
void from_json(const nlohmann::json& j, RoutineEntry& e);
void to_json(nlohmann::json& j, const Persona& p);
void from_json(const nlohmann::json& j, Persona& p);
void to_json(nlohmann::json& j, const ConflictLabel& l);
void from_json(const nlohmann::json& j, ConflictLabel& l);
void to_json(nlohmann::json& j, const ConflictGroundTruth& gt);
void from_json(const nlohmann::json& j, ConflictGroundTruth& gt);

std::string read_file(const std::filesystem::path& path);
/// Writes atomically enough for our purposes: temp file + rename.
void write_file(const std::filesystem::path& path, const std::string& contents);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

WorldConfig load_world_config(const std::filesystem::path& path);
std::vector<Persona> load_personas(const std::filesystem::path& path);
void save_personas(const std::filesystem::path& path, const std::vector<Persona>& personas);

/// JSON Lines form of a log: a {"header": ...} line, then one event per line.
std::string log_to_jsonl(const ObservationLog& log);
ObservationLog log_from_jsonl(const std::string& text);

/// Dispatches on extension: ".jsonl" for JSON Lines, anything else JSON.
ObservationLog load_log(const std::filesystem::path& path);
void save_log(const std::filesystem::path& path, const ObservationLog& log);

}  // namespace lsti
