#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "lsti/agents.hpp"
#include "lsti/conflict.hpp"
#include "lsti/metrics.hpp"

namespace lsti {

/// Per-participant seed stream derived from the run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view participant, std::uint64_t stream);

/// Generates the log and injects conflicts, each from its own stream.
LabeledLog simulate_participant(const Persona& persona, const WorldConfig& config, int days,
                                std::uint64_t seed);

struct Dataset {
  WorldConfig config;
  std::vector<LabeledLog> logs;

  const LabeledLog& participant(std::string_view id) const;
};

Dataset generate_dataset(const std::vector<Persona>& personas, const WorldConfig& config, int days,
                         std::uint64_t seed);

/// dir/world.json, dir/layout.json, dir/index.json and per participant
/// dir/{id}.jsonl plus dir/{id}.gt.json.
void save_dataset(const std::filesystem::path& dir, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& dir);
/// A log plus its sibling .gt.json; mined ground truth when that is absent.
LabeledLog load_labeled(const std::filesystem::path& log_path);

/// All intention texts of a log, actual and expected.
IntentionSet intention_set_of(const LabeledLog& data);

using AgentMap = std::map<AgentKind, AgentModel>;

struct TrainSettings {
  std::uint64_t seed = 7;
  std::vector<AgentKind> kinds{kAllAgentKinds.begin(), kAllAgentKinds.end()};
  /// Progress lines; may be empty.
  std::function<void(const std::string&)> log;
  /// Applied on top of default_hyper when positive.
  int max_epochs = 0;
};

/// Trains one model per kind on the union of the logs' training splits.
AgentMap pretrain(const std::vector<LabeledLog>& logs, const WorldConfig& config,
                  const TrainSettings& settings);
/// Fine-tunes each base model on one participant.
AgentMap personalize(const AgentMap& base, const LabeledLog& data, const WorldConfig& config,
                     const TrainSettings& settings);

/// Writes dir/{participant}/{key}.ckpt and records them in the manifest.
void save_agents(const std::filesystem::path& dir, const std::string& participant,
                 const AgentMap& agents, const std::vector<std::string>& intentions,
                 Manifest& manifest);

/// Loads every kind for a participant, falling back to "base" entries.
AgentMap load_agents(const Manifest& manifest, const std::filesystem::path& manifest_path,
                     const std::string& participant);

AgentBundle bundle_of(const AgentMap& agents);

/// Report columns for one participant on its chronological test split.
ParticipantMetrics evaluate_agents(const AgentMap& agents, const LabeledLog& data,
                                   const WorldConfig& config);
MetricsReport evaluate_manifest(const std::filesystem::path& manifest_path, const Dataset& dataset);

/// Learned pipeline over the test split: the short-term agent's embedding
/// snapped to its nearest set entry against the long-term agent's top-K.
std::vector<ConflictReport> detect_learned(const AgentMap& agents, const LabeledLog& data,
                                           const WorldConfig& config,
                                           std::size_t k = kDefaultListSize,
                                           double delta = kDefaultDelta);

}  // namespace lsti
