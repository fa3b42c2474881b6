// lsti: dataset generation, training, evaluation, conflict detection and the
// session service.

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "lsti/error.hpp"
#include "lsti/json_io.hpp"
#include "lsti/pipeline.hpp"
#include "lsti/service.hpp"

namespace fs = std::filesystem;
using namespace lsti;

namespace {

constexpr int kUsageExit = 2;
constexpr int kPipelineExit = 1;

HttpService* g_service = nullptr;

void on_signal(int) {
  if (g_service != nullptr) g_service->stop();
}

WorldConfig config_or_default(const std::string& path) {
  return path.empty() ? default_world_config() : load_world_config(path);
}

std::function<void(const std::string&)> logger(bool quiet) {
  if (quiet) return {};
  return [](const std::string& line) { std::cerr << line << '\n'; };
}

std::vector<AgentKind> parse_kinds(const std::vector<std::string>& names) {
  if (names.empty()) return {kAllAgentKinds.begin(), kAllAgentKinds.end()};
  std::vector<AgentKind> out;
  for (const auto& n : names) out.push_back(agent_kind_from_string(n));
  return out;
}

std::vector<std::string> union_intentions(const Dataset& d) {
  std::vector<std::string> texts;
  for (const auto& l : d.logs) {
    const auto set = intention_set_of(l);
    texts.insert(texts.end(), set.texts().begin(), set.texts().end());
  }
  return IntentionSet("base", texts).texts();
}

void print_scores(const DetectorScores& s) {
  std::cout << nlohmann::json{{"recall", s.recall},
                              {"false_positive_rate", s.false_positive_rate},
                              {"precision", s.precision},
                              {"tp", s.tp},
                              {"fp", s.fp},
                              {"tn", s.tn},
                              {"fn", s.fn}}
                   .dump()
            << '\n';
}

nlohmann::json report_json(const ConflictReport& r) {
  auto list = nlohmann::json::array();
  for (const auto& c : r.long_list) list.push_back({{"text", c.text}, {"similarity", c.similarity}});
  return {{"event_index", r.event_index}, {"t_k", r.t_k},
          {"r_conf", r.r_conf},           {"min_distance", r.min_distance},
          {"threshold", r.threshold},     {"short_intention", r.short_intention},
          {"long_list", list},            {"query_text", r.query_text}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Long short-term intention engine"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Simulate persona logs with injected conflicts");
  std::string gen_personas, gen_config, gen_out;
  int gen_days = 28;
  std::uint64_t gen_seed = 42;
  gen->add_option("--personas", gen_personas, "Persona JSON file")->required()->check(CLI::ExistingFile);
  gen->add_option("--config", gen_config, "WorldConfig JSON (default household if omitted)")
      ->check(CLI::ExistingFile);
  gen->add_option("--days", gen_days, "Days per participant")->check(CLI::Range(1, 3650));
  gen->add_option("--seed", gen_seed, "Run seed");
  gen->add_option("--out", gen_out, "Output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "Pretrain base agents on every participant's 70%");
  std::string train_data, train_out;
  std::uint64_t train_seed = 7;
  int train_epochs = 0;
  std::vector<std::string> train_kinds;
  bool train_quiet = false;
  train->add_option("--data", train_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--out", train_out, "Checkpoint directory")->required();
  train->add_option("--seed", train_seed, "Training seed");
  train->add_option("--max-epochs", train_epochs, "Override the epoch cap")->check(CLI::Range(1, 10000));
  train->add_option("--kinds", train_kinds, "Subset of action,duration,short,long,baseline")
      ->delimiter(',');
  train->add_flag("--quiet", train_quiet, "No progress output");

  // finetune
  auto* ft = app.add_subcommand("finetune", "Personalize base agents per participant");
  std::string ft_data, ft_manifest;
  std::vector<std::string> ft_participants;
  std::uint64_t ft_seed = 7;
  int ft_epochs = 0;
  std::vector<std::string> ft_kinds;
  bool ft_quiet = false;
  ft->add_option("--data", ft_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ft->add_option("--manifest", ft_manifest, "Manifest written by train")->required()->check(CLI::ExistingFile);
  ft->add_option("--participant", ft_participants, "Participant id (repeatable; default all)");
  ft->add_option("--seed", ft_seed, "Training seed");
  ft->add_option("--max-epochs", ft_epochs, "Override the epoch cap")->check(CLI::Range(1, 10000));
  ft->add_option("--kinds", ft_kinds, "Subset of action,duration,short,long,baseline")->delimiter(',');
  ft->add_flag("--quiet", ft_quiet, "No progress output");

  // eval
  auto* ev = app.add_subcommand("eval", "Structured model vs end-to-end baseline report");
  std::string ev_data, ev_manifest, ev_out;
  ev->add_option("--data", ev_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--manifest", ev_manifest, "Checkpoint manifest")->required()->check(CLI::ExistingFile);
  ev->add_option("--out", ev_out, "Report path; .json and .txt are written");

  // detect
  auto* det = app.add_subcommand("detect", "Replay a log through the conflict detector");
  std::string det_log, det_manifest, det_config, det_out;
  double det_delta = kDefaultDelta;
  std::size_t det_k = kDefaultListSize;
  bool det_oracle = false;
  det->add_option("--log", det_log, "Observation log (.jsonl or .json)")->required()->check(CLI::ExistingFile);
  det->add_option("--delta", det_delta, "Conflict threshold")->check(CLI::Range(0.0, 2.0));
  det->add_option("--k", det_k, "Long-term list size")->check(CLI::PositiveNumber);
  det->add_flag("--oracle", det_oracle, "Embed ground-truth intention texts directly");
  det->add_option("--manifest", det_manifest, "Checkpoint manifest for learned detection")
      ->check(CLI::ExistingFile);
  det->add_option("--config", det_config, "WorldConfig JSON (default: world.json beside the log)")
      ->check(CLI::ExistingFile);
  det->add_option("--out", det_out, "Write the reports as JSON");

  // serve
  auto* srv = app.add_subcommand("serve", "Run the HTTP session service");
  std::string srv_host = "127.0.0.1", srv_dir, srv_manifest, srv_config;
  int srv_port = 8080;
  srv->add_option("--host", srv_host, "Bind address");
  srv->add_option("--port", srv_port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
  srv->add_option("--data-dir", srv_dir, "Session directory (default $LSTI_DATA_DIR or ./sessions)");
  srv->add_option("--manifest", srv_manifest, "Checkpoint manifest")->check(CLI::ExistingFile);
  srv->add_option("--config", srv_config, "WorldConfig JSON")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageExit;
  }

  if (det->parsed() && det_oracle == !det_manifest.empty()) {
    std::cerr << "detect: give exactly one of --oracle or --manifest\n";
    return kUsageExit;
  }

  try {
    if (gen->parsed()) {
      const auto config = config_or_default(gen_config);
      const auto personas = load_personas(gen_personas);
      for (const auto& p : personas) p.validate(config);
      save_dataset(gen_out, generate_dataset(personas, config, gen_days, gen_seed));
      std::cout << "wrote " << personas.size() << " participants to " << gen_out << '\n';
    } else if (train->parsed()) {
      const auto data = load_dataset(train_data);
      TrainSettings s;
      s.seed = train_seed;
      s.kinds = parse_kinds(train_kinds);
      s.max_epochs = train_epochs;
      s.log = logger(train_quiet);
      const auto base = pretrain(data.logs, data.config, s);
      Manifest manifest;
      const fs::path out = train_out;
      save_agents(out, "base", base, union_intentions(data), manifest);
      manifest.save(out / "manifest.json");
      std::cout << "wrote " << (out / "manifest.json").string() << '\n';
    } else if (ft->parsed()) {
      const auto data = load_dataset(ft_data);
      const fs::path manifest_path = ft_manifest;
      auto manifest = Manifest::load(manifest_path);
      TrainSettings s;
      s.seed = ft_seed;
      s.kinds = parse_kinds(ft_kinds);
      s.max_epochs = ft_epochs;
      s.log = logger(ft_quiet);
      std::vector<const LabeledLog*> targets;
      if (ft_participants.empty()) {
        for (const auto& l : data.logs) targets.push_back(&l);
      } else {
        for (const auto& id : ft_participants) targets.push_back(&data.participant(id));
      }
      AgentMap base;
      for (const auto kind : s.kinds) {
        base.emplace(kind, AgentModel::load(manifest.path_of(manifest_path, "base", kind)));
      }
      for (const auto* l : targets) {
        const auto tuned = personalize(base, *l, data.config, s);
        save_agents(manifest_path.parent_path(), l->log.participant_id, tuned,
                    intention_set_of(*l).texts(), manifest);
        manifest.save(manifest_path);
        std::cout << "fine-tuned " << l->log.participant_id << '\n';
      }
    } else if (ev->parsed()) {
      const auto report = evaluate_manifest(ev_manifest, load_dataset(ev_data));
      const auto text = report.to_text();
      std::cout << text;
      if (!ev_out.empty()) {
        fs::path out = ev_out;
        if (out.has_parent_path()) fs::create_directories(out.parent_path());
        write_json(fs::path(out).replace_extension(".json"), report.to_json());
        write_file(fs::path(out).replace_extension(".txt"), text);
      }
    } else if (det->parsed()) {
      const auto data = load_labeled(det_log);
      std::vector<ConflictReport> reports;
      if (det_oracle) {
        reports = detect_oracle(data.log, data.gt, det_delta);
      } else {
        fs::path cfg = det_config;
        if (cfg.empty()) cfg = fs::path(det_log).parent_path() / "world.json";
        const auto config = fs::exists(cfg) ? load_world_config(cfg) : default_world_config();
        const auto manifest = Manifest::load(det_manifest);
        const auto agents = load_agents(manifest, det_manifest, data.log.participant_id);
        reports = detect_learned(agents, data, config, det_k, det_delta);
      }
      print_scores(evaluate_detector(reports, data.gt));
      if (!det_out.empty()) {
        auto arr = nlohmann::json::array();
        for (const auto& r : reports) arr.push_back(report_json(r));
        write_json(det_out, {{"v", kSchemaVersion}, {"reports", arr}});
      }
    } else if (srv->parsed()) {
      if (srv_dir.empty()) {
        const char* env = std::getenv("LSTI_DATA_DIR");
        srv_dir = env != nullptr && *env != '\0' ? env : "sessions";
      }
      std::shared_ptr<ModelRegistry> registry;
      if (!srv_manifest.empty()) registry = std::make_shared<ModelRegistry>(srv_manifest);
      SessionStore store(srv_dir, config_or_default(srv_config), registry);
      HttpService service(store);
      const int port = service.bind(srv_host, srv_port);
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "listening on http://" << srv_host << ':' << port << std::endl;
      service.listen();
      g_service = nullptr;
    }
  } catch (const std::exception& e) {
    std::cerr << "lsti: " << e.what() << '\n';
    return kPipelineExit;
  }
  return 0;
}
