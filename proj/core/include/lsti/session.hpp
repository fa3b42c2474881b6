#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "lsti/agents.hpp"
#include "lsti/conflict.hpp"
#include "lsti/world.hpp"

namespace lsti {

/// Agents of one participant, loaded from a manifest. Kinds missing for the
/// participant fall back to the "base" entries.
struct ModelSet {
  std::string participant;
  std::optional<AgentModel> action;
  std::optional<AgentModel> duration;
  std::optional<AgentModel> short_intention;
  std::optional<AgentModel> long_intention;
  IntentionSet intentions;

  static ModelSet load(const Manifest& manifest, const std::filesystem::path& manifest_path,
                       const std::string& participant);
};

/// Lazily loads and caches ModelSets. Thread-safe.
class ModelRegistry {
 public:
  explicit ModelRegistry(std::filesystem::path manifest_path);
  std::shared_ptr<const ModelSet> get(const std::string& participant);
  const std::filesystem::path& manifest_path() const { return path_; }

 private:
  std::filesystem::path path_;
  Manifest manifest_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<const ModelSet>> cache_;
};

/// Body of POST /sessions/{id}/actions.
struct ActionRequest {
  std::string action;
  std::string object{kNoObject};
  std::string room;
  std::string intention;
  int duration = 0;
  /// Explicit post-state name; default_effect otherwise.
  std::optional<std::string> post_state;

  /// Throws FormatError on missing or mistyped fields.
  static ActionRequest from_json(const nlohmann::json& j);
};

struct SessionInfo {
  std::string id;
  std::string participant = "base";
  Date start_date = kDefaultStartDate;
  int days = 28;
  /// Minute of the first day at which the logical clock starts.
  int start_minute = 0;
  bool overrun_gate = true;
  double delta = kDefaultDelta;

  nlohmann::json to_json() const;
  static SessionInfo from_json(const nlohmann::json& j);
};

/// One interactive session. Every posted action is appended to a JSON Lines
/// file before it is acknowledged; resume() folds the file back into the
/// same state. Not thread-safe; SessionStore serializes access.
class Session {
 public:
  /// Throws Error when the file already exists.
  static Session create(const std::filesystem::path& file, SessionInfo info,
                        const WorldConfig& config, std::shared_ptr<const ModelSet> models);
  /// A trailing line without its newline (torn write) is discarded.
  static Session resume(const std::filesystem::path& file, const WorldConfig& config,
                        std::shared_ptr<const ModelSet> models);

  const SessionInfo& info() const { return info_; }
  const WorldState& state() const { return state_; }
  const ObservationLog& log() const { return log_; }
  const std::vector<ConflictReport>& reports() const { return reports_; }

  /// Validates, persists and applies one action, then refreshes
  /// predictions and runs the detector. Throws ValidationError with the
  /// world rule id.
  const Observation& post_action(const ActionRequest& request);

  nlohmann::json state_json() const;
  nlohmann::json predictions_json() const;
  nlohmann::json conflicts_json() const;

 private:
  Session(std::filesystem::path file, SessionInfo info, const WorldConfig& config,
          std::shared_ptr<const ModelSet> models);

  Observation make_observation(const ActionRequest& request) const;
  void apply(const Observation& obs);
  void refresh_predictions();
  Matrix time_row(Instant t) const;

  std::filesystem::path file_;
  SessionInfo info_;
  const WorldConfig* config_;
  FeatureEncoder encoder_;
  std::shared_ptr<const ModelSet> models_;
  WorldState state_;
  ObservationLog log_;
  Matrix rows_;
  std::vector<ConflictReport> reports_;
  nlohmann::json predictions_;
};

/// Sessions by id under one directory; one lock per session.
class SessionStore {
 public:
  /// `registry` may be null: sessions then record but predict nothing.
  SessionStore(std::filesystem::path dir, WorldConfig config,
               std::shared_ptr<ModelRegistry> registry);

  const WorldConfig& config() const { return config_; }
  const std::filesystem::path& dir() const { return dir_; }

  /// Body fields are all optional: id, participant, start_date, days,
  /// start_minute, overrun_gate, delta. Returns the state.
  nlohmann::json create(const nlohmann::json& body);
  nlohmann::json state(const std::string& id);
  nlohmann::json post_action(const std::string& id, const nlohmann::json& body);
  nlohmann::json predictions(const std::string& id);
  nlohmann::json conflicts(const std::string& id);
  /// Rebuilds the session from its file, whether or not it is loaded.
  nlohmann::json resume(const std::string& id);
  ObservationLog export_log(const std::string& id);

 private:
  struct Slot {
    std::shared_mutex mu;
    std::optional<Session> session;
  };
  std::shared_ptr<Slot> slot(const std::string& id);
  std::shared_ptr<const ModelSet> models_for(const std::string& participant);
  std::filesystem::path file_of(const std::string& id) const;

  std::filesystem::path dir_;
  WorldConfig config_;
  std::shared_ptr<ModelRegistry> registry_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Slot>> slots_;
  std::size_t next_id_ = 1;
};

}  // namespace lsti
