#include "lsti/pipeline.hpp"

#include <chrono>
#include <cstdio>

#include "lsti/error.hpp"
#include "lsti/hash.hpp"
#include "lsti/json_io.hpp"

namespace lsti {

namespace {

std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Hyper hyper_for(AgentKind kind, const TrainSettings& s) {
  auto h = default_hyper(kind);
  if (s.max_epochs > 0) h.max_epochs = s.max_epochs;
  return h;
}

TrainOptions progress(const TrainSettings& s, const std::string& who, AgentKind kind) {
  TrainOptions o;
  if (s.log) {
    o.on_epoch = [&s, who, kind](int epoch, double train, double val) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s %s epoch %d train %.6f val %.6f", who.c_str(),
                    std::string(to_string(kind)).c_str(), epoch, train, val);
      s.log(buf);
    };
  }
  return o;
}

std::uint64_t kind_stream(AgentKind kind) { return 100 + static_cast<std::uint64_t>(kind); }

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::string_view participant, std::uint64_t stream) {
  return mix(mix(seed ^ fnv1a64(participant)) + stream);
}

LabeledLog simulate_participant(const Persona& persona, const WorldConfig& config, int days,
                                std::uint64_t seed) {
  const auto log = generate_log(persona, config, days, derive_seed(seed, persona.id, 0));
  auto [injected, gt] = inject_conflicts(log, persona, config, derive_seed(seed, persona.id, 1));
  return {std::move(injected), std::move(gt)};
}

const LabeledLog& Dataset::participant(std::string_view id) const {
  for (const auto& l : logs) {
    if (l.log.participant_id == id) return l;
  }
  throw NotFoundError("dataset has no participant '" + std::string(id) + "'");
}

Dataset generate_dataset(const std::vector<Persona>& personas, const WorldConfig& config, int days,
                         std::uint64_t seed) {
  config.validate();
  Dataset d;
  d.config = config;
  for (const auto& p : personas) d.logs.push_back(simulate_participant(p, config, days, seed));
  return d;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  std::filesystem::create_directories(dir);
  nlohmann::json config;
  to_json(config, dataset.config);
  write_json(dir / "world.json", config);
  write_file(dir / "layout.json", FeatureLayout::for_config(dataset.config).to_json() + "\n");
  auto ids = nlohmann::json::array();
  for (const auto& l : dataset.logs) {
    const auto& id = l.log.participant_id;
    save_log(dir / (id + ".jsonl"), l.log);
    nlohmann::json gt;
    to_json(gt, l.gt);
    write_json(dir / (id + ".gt.json"), gt);
    ids.push_back(id);
  }
  write_json(dir / "index.json", {{"v", kSchemaVersion}, {"participants", ids}});
}

LabeledLog load_labeled(const std::filesystem::path& log_path) {
  LabeledLog out;
  out.log = load_log(log_path);
  auto gt_path = log_path;
  gt_path.replace_extension(".gt.json");
  if (std::filesystem::exists(gt_path)) {
    try {
      from_json(read_json(gt_path), out.gt);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(gt_path.string() + ": " + e.what());
    }
    if (out.gt.labels.size() != out.log.events.size()) {
      throw FormatError(gt_path.string() + " does not align with " + log_path.string());
    }
  } else {
    out.gt = mine_ground_truth(out.log);
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset d;
  d.config = load_world_config(dir / "world.json");
  const auto index = read_json(dir / "index.json");
  try {
    for (const auto& id : index.at("participants")) {
      d.logs.push_back(load_labeled(dir / (id.get<std::string>() + ".jsonl")));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError((dir / "index.json").string() + ": " + e.what());
  }
  return d;
}

IntentionSet intention_set_of(const LabeledLog& data) {
  std::vector<std::string> texts;
  for (const auto& e : data.log.events) texts.push_back(e.intention);
  for (const auto& l : data.gt.labels) texts.push_back(l.expected_long_intention);
  return IntentionSet(data.log.participant_id, texts);
}

AgentMap pretrain(const std::vector<LabeledLog>& logs, const WorldConfig& config,
                  const TrainSettings& settings) {
  const auto corpus = make_corpus(logs, config);
  AgentMap out;
  for (const auto kind : settings.kinds) {
    const auto t0 = std::chrono::steady_clock::now();
    auto r = train_agent(kind, corpus, hyper_for(kind, settings),
                         derive_seed(settings.seed, "base", kind_stream(kind)),
                         progress(settings, "base", kind));
    if (settings.log) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      char buf[128];
      std::snprintf(buf, sizeof buf, "base %s best epoch %d (%.1f s)",
                    std::string(to_string(kind)).c_str(), r.best_epoch, secs);
      settings.log(buf);
    }
    out.emplace(kind, std::move(r.model));
  }
  return out;
}

AgentMap personalize(const AgentMap& base, const LabeledLog& data, const WorldConfig& config,
                     const TrainSettings& settings) {
  const auto corpus = make_corpus({data}, config);
  const auto& who = data.log.participant_id;
  AgentMap out;
  for (const auto kind : settings.kinds) {
    const auto it = base.find(kind);
    if (it == base.end()) throw Error("no base " + std::string(to_string(kind)) + " model");
    auto r = finetune(it->second, corpus, hyper_for(kind, settings),
                      derive_seed(settings.seed, who, kind_stream(kind)), who,
                      progress(settings, who, kind));
    out.emplace(kind, std::move(r.model));
  }
  return out;
}

void save_agents(const std::filesystem::path& dir, const std::string& participant,
                 const AgentMap& agents, const std::vector<std::string>& intentions,
                 Manifest& manifest) {
  std::filesystem::create_directories(dir / participant);
  for (const auto& [kind, model] : agents) {
    const auto rel = participant + "/" + std::string(manifest_key(kind)) + ".ckpt";
    model.save(dir / rel);
    manifest.entries[participant][std::string(manifest_key(kind))] = rel;
  }
  if (!intentions.empty()) manifest.intentions[participant] = intentions;
}

AgentMap load_agents(const Manifest& manifest, const std::filesystem::path& manifest_path,
                     const std::string& participant) {
  AgentMap out;
  for (const auto kind : kAllAgentKinds) {
    const auto key = std::string(manifest_key(kind));
    for (const auto& who : {participant, std::string("base")}) {
      const auto p = manifest.entries.find(who);
      if (p != manifest.entries.end() && p->second.contains(key)) {
        out.emplace(kind, AgentModel::load(manifest.path_of(manifest_path, who, kind)));
        break;
      }
    }
  }
  return out;
}

AgentBundle bundle_of(const AgentMap& agents) {
  const auto get = [&](AgentKind k) -> const AgentModel* {
    const auto it = agents.find(k);
    return it == agents.end() ? nullptr : &it->second;
  };
  return {get(AgentKind::action), get(AgentKind::duration), get(AgentKind::short_intention),
          get(AgentKind::long_intention), get(AgentKind::baseline_end_to_end)};
}

ParticipantMetrics evaluate_agents(const AgentMap& agents, const LabeledLog& data,
                                   const WorldConfig& config) {
  const auto corpus = make_corpus({data}, config);
  return evaluate_participant(bundle_of(agents), corpus, 0, intention_set_of(data));
}

MetricsReport evaluate_manifest(const std::filesystem::path& manifest_path, const Dataset& dataset) {
  const auto manifest = Manifest::load(manifest_path);
  MetricsReport report;
  for (const auto& data : dataset.logs) {
    const auto agents = load_agents(manifest, manifest_path, data.log.participant_id);
    report.rows.push_back(evaluate_agents(agents, data, dataset.config));
  }
  return report;
}

std::vector<ConflictReport> detect_learned(const AgentMap& agents, const LabeledLog& data,
                                           const WorldConfig& config, std::size_t k,
                                           double delta) {
  const auto bundle = bundle_of(agents);
  if (bundle.short_intention == nullptr || bundle.long_intention == nullptr) {
    throw Error("learned detection needs short and long intention models");
  }
  const auto corpus = make_corpus({data}, config);
  bundle.short_intention->check_compatible(corpus);
  bundle.long_intention->check_compatible(corpus);
  const auto set = intention_set_of(data);
  const auto& log = corpus.logs.front();
  const auto& si = *bundle.short_intention;
  const auto& li = *bundle.long_intention;

  std::vector<ConflictReport> out;
  for (const auto& ref : corpus.test) {
    const auto t = ref.target;
    const auto row = log.rows.row(t);
    const auto emb = predict_short_intention(si, si.window(log.rows, t), si.query(row));
    const auto snapped = set.top(emb, 1).front().text;
    const auto ranked = predict_long_intentions(li, li.window(log.rows, t), li.query(row), set, k);
    std::vector<LongCandidate> list;
    for (const auto& r : ranked) list.push_back({r.text, embed_intention(r.text), r.similarity});
    auto report = detect(embed_intention(snapped), snapped, list, delta,
                         data.log.events[t].start());
    report.event_index = t;
    out.push_back(std::move(report));
  }
  return out;
}

}  // namespace lsti
