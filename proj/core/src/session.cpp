#include "lsti/session.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "lsti/error.hpp"
#include "lsti/json_io.hpp"

namespace lsti {

namespace {

void append_line(const std::filesystem::path& file, const std::string& line) {
  const int fd = ::open(file.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
  if (fd < 0) throw Error("cannot open " + file.string() + ": " + std::strerror(errno));
  const std::string data = line + "\n";
  std::size_t done = 0;
  while (done < data.size()) {
    const auto n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      const std::string why = std::strerror(errno);
      ::close(fd);
      throw Error("cannot write " + file.string() + ": " + why);
    }
    done += static_cast<std::size_t>(n);
  }
  ::fdatasync(fd);
  ::close(fd);
}

std::string require_string(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw FormatError(std::string("missing field '") + key + "'");
  if (!j.at(key).is_string()) throw FormatError(std::string("field '") + key + "' must be a string");
  return j.at(key).get<std::string>();
}

nlohmann::json ranked_json(const std::vector<LongCandidate>& list) {
  auto out = nlohmann::json::array();
  for (const auto& c : list) out.push_back({{"text", c.text}, {"similarity", c.similarity}});
  return out;
}

nlohmann::json report_json(const ConflictReport& r) {
  return {{"r_conf", r.r_conf},
          {"min_distance", r.min_distance},
          {"threshold", r.threshold},
          {"short_intention", r.short_intention},
          {"long_list", ranked_json(r.long_list)},
          {"query_text", r.query_text},
          {"t_k", r.t_k},
          {"event_index", r.event_index}};
}

}  // namespace

// ----------------------------------------------------------------- models

ModelSet ModelSet::load(const Manifest& manifest, const std::filesystem::path& manifest_path,
                        const std::string& participant) {
  ModelSet m;
  m.participant = participant;
  const auto pick = [&](AgentKind kind) -> std::optional<AgentModel> {
    const auto key = std::string(manifest_key(kind));
    for (const auto& who : {participant, std::string("base")}) {
      const auto p = manifest.entries.find(who);
      if (p != manifest.entries.end() && p->second.contains(key)) {
        return AgentModel::load(manifest.path_of(manifest_path, who, kind));
      }
    }
    return std::nullopt;
  };
  m.action = pick(AgentKind::action);
  m.duration = pick(AgentKind::duration);
  m.short_intention = pick(AgentKind::short_intention);
  m.long_intention = pick(AgentKind::long_intention);
  for (const auto& who : {participant, std::string("base")}) {
    if (const auto it = manifest.intentions.find(who); it != manifest.intentions.end()) {
      m.intentions = IntentionSet(participant, it->second);
      break;
    }
  }
  return m;
}

ModelRegistry::ModelRegistry(std::filesystem::path manifest_path)
    : path_(std::move(manifest_path)), manifest_(Manifest::load(path_)) {}

std::shared_ptr<const ModelSet> ModelRegistry::get(const std::string& participant) {
  std::lock_guard lock(mu_);
  if (const auto it = cache_.find(participant); it != cache_.end()) return it->second;
  auto set = std::make_shared<const ModelSet>(ModelSet::load(manifest_, path_, participant));
  cache_.emplace(participant, set);
  return set;
}

// --------------------------------------------------------------- requests

ActionRequest ActionRequest::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("action body must be a JSON object");
  ActionRequest r;
  r.action = require_string(j, "action");
  r.object = require_string(j, "object");
  r.room = require_string(j, "room");
  r.intention = require_string(j, "intention");
  if (!j.contains("duration") || !j.at("duration").is_number_integer()) {
    throw FormatError("field 'duration' must be an integer number of minutes");
  }
  r.duration = j.at("duration").get<int>();
  if (j.contains("post_state")) r.post_state = require_string(j, "post_state");
  if (normalize_text(r.intention).empty()) throw FormatError("field 'intention' must not be empty");
  return r;
}

nlohmann::json SessionInfo::to_json() const {
  nlohmann::json d;
  lsti::to_json(d, start_date);
  return {{"id", id},         {"participant", participant},   {"start_date", d},
          {"days", days},     {"start_minute", start_minute}, {"overrun_gate", overrun_gate},
          {"delta", delta}};
}

SessionInfo SessionInfo::from_json(const nlohmann::json& j) {
  SessionInfo s;
  try {
    if (j.contains("id")) s.id = j.at("id").get<std::string>();
    if (j.contains("participant")) s.participant = j.at("participant").get<std::string>();
    if (j.contains("start_date")) lsti::from_json(j.at("start_date"), s.start_date);
    if (j.contains("days")) s.days = j.at("days").get<int>();
    if (j.contains("start_minute")) s.start_minute = j.at("start_minute").get<int>();
    if (j.contains("overrun_gate")) s.overrun_gate = j.at("overrun_gate").get<bool>();
    if (j.contains("delta")) s.delta = j.at("delta").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("session options: ") + e.what());
  }
  if (s.days < 1) throw FormatError("days must be positive");
  if (s.start_minute < 0 || s.start_minute >= kMinutesPerDay) {
    throw FormatError("start_minute must lie in [0, 1440)");
  }
  if (!(s.delta >= 0.0 && s.delta <= 2.0)) throw FormatError("delta must lie in [0, 2]");
  return s;
}

// ---------------------------------------------------------------- session

Session::Session(std::filesystem::path file, SessionInfo info, const WorldConfig& config,
                 std::shared_ptr<const ModelSet> models)
    : file_(std::move(file)),
      info_(std::move(info)),
      config_(&config),
      encoder_(config),
      models_(std::move(models)) {
  log_.participant_id = info_.participant;
  log_.config_fingerprint = config.fingerprint();
  log_.start_date = info_.start_date;
  log_.days = info_.days;
  state_ = init_world(config, log_.horizon_start() + info_.start_minute);
  rows_ = Matrix(0, encoder_.layout().width(true));
  refresh_predictions();
}

Session Session::create(const std::filesystem::path& file, SessionInfo info,
                        const WorldConfig& config, std::shared_ptr<const ModelSet> models) {
  if (std::filesystem::exists(file)) throw Error("session file " + file.string() + " exists");
  Session s(file, std::move(info), config, std::move(models));
  append_line(file, nlohmann::json{{"v", kSchemaVersion},
                                   {"session", s.info_.to_json()},
                                   {"config_fingerprint", s.log_.config_fingerprint}}
                        .dump());
  return s;
}

Session Session::resume(const std::filesystem::path& file, const WorldConfig& config,
                        std::shared_ptr<const ModelSet> models) {
  if (!std::filesystem::exists(file)) throw NotFoundError("no session file " + file.string());
  auto text = read_file(file);
  if (const auto last = text.rfind('\n'); last == std::string::npos) {
    throw FormatError(file.string() + ": missing session header");
  } else if (last + 1 != text.size()) {
    text.resize(last + 1);
    std::filesystem::resize_file(file, text.size());
  }
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(file.string() + ": bad header: " + e.what());
  }
  if (!header.contains("session")) throw FormatError(file.string() + ": bad header");
  if (header.value("config_fingerprint", std::string()) != config.fingerprint()) {
    throw Error(file.string() + ": recorded with a different world config");
  }
  Session s(file, SessionInfo::from_json(header.at("session")), config, std::move(models));
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Observation obs;
    try {
      lsti::from_json(nlohmann::json::parse(line), obs);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(file.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    s.apply(obs);
  }
  return s;
}

Observation Session::make_observation(const ActionRequest& r) const {
  if (r.duration < 0) {
    throw ValidationError(std::string(rule::kNegativeDuration),
                          "duration " + std::to_string(r.duration) + " is negative");
  }
  Observation obs;
  obs.participant_id = info_.participant;
  obs.action = r.action;
  obs.object_id = r.object;
  obs.room = r.room;
  obs.intention = r.intention;
  obs.duration_min = r.duration;
  obs.set_start(state_.clock);
  if (config_->action_index(r.action) < 0) {
    throw ValidationError(std::string(rule::kUnknownAction), "unknown action '" + r.action + "'");
  }
  if (config_->object_index(r.object) < 0) {
    throw ValidationError(std::string(rule::kUnknownObject), "unknown object '" + r.object + "'");
  }
  if (r.post_state) {
    const auto& schema = config_->schema_of(r.object);
    const auto it = std::find(schema.begin(), schema.end(), *r.post_state);
    if (it == schema.end()) {
      throw ValidationError(std::string(rule::kStateNotInSchema),
                            "state '" + *r.post_state + "' not in the schema of '" + r.object + "'");
    }
    obs.post_state = default_effect(*config_, state_, r.action, r.object);
    obs.post_state.state = static_cast<int>(it - schema.begin());
  } else {
    obs.post_state = default_effect(*config_, state_, r.action, r.object);
  }
  return obs;
}

const Observation& Session::post_action(const ActionRequest& request) {
  const auto obs = make_observation(request);
  // Validate before persisting; apply() repeats the fold on the same input.
  (void)apply_action(state_, obs, *config_);
  nlohmann::json line;
  lsti::to_json(line, obs);
  append_line(file_, line.dump());
  apply(obs);
  return log_.events.back();
}

void Session::apply(const Observation& obs) {
  state_ = apply_action(state_, obs, *config_);

  const auto row = encoder_.encode(obs, Horizon::of(log_), true);
  rows_.data.insert(rows_.data.end(), row.begin(), row.end());
  ++rows_.rows;
  log_.events.push_back(obs);

  const std::size_t k = log_.events.size() - 1;
  if (models_ && models_->long_intention && models_->intentions.size() > 0) {
    const auto& li = *models_->long_intention;
    const auto list_size = std::min(kDefaultListSize, models_->intentions.size());
    const auto ranked = predict_long_intentions(li, li.window(rows_, k), li.query(rows_.row(k)),
                                                models_->intentions, list_size);
    std::vector<LongCandidate> candidates;
    for (const auto& r : ranked) candidates.push_back({r.text, embed_intention(r.text), r.similarity});

    bool gate = true;
    if (info_.overrun_gate) gate = overrun_gate_open(obs.start(), obs.duration_min, std::nullopt);
    if (gate) {
      auto report = detect(embed_intention(obs.intention), normalize_text(obs.intention),
                           candidates, info_.delta, obs.start());
      report.event_index = k;
      reports_.push_back(std::move(report));
    }
  }
  refresh_predictions();
}

Matrix Session::time_row(Instant t) const {
  Matrix row(1, encoder_.layout().width(true));
  const auto tf = time_features(t, Horizon::of(log_));
  std::copy(tf.begin(), tf.end(), row.data.begin());
  return row;
}

void Session::refresh_predictions() {
  nlohmann::json p{{"v", kSchemaVersion}, {"events", log_.events.size()}, {"at", state_.clock}};
  if (!models_ || !models_->action) {
    p["available"] = false;
    predictions_ = std::move(p);
    return;
  }
  p["available"] = true;
  const auto next = time_row(state_.clock);
  const std::size_t end = log_.events.size();

  const auto& a = *models_->action;
  const auto probs = predict_action(a, a.window(rows_, end), a.query(next.row(0)));
  const auto order = rank_actions(probs);
  auto actions = nlohmann::json::array();
  for (std::size_t i = 0; i < std::min<std::size_t>(5, order.size()); ++i) {
    actions.push_back({{"action", config_->actions[order[i]]}, {"p", probs[order[i]]}});
  }
  p["next_actions"] = actions;

  if (models_->duration) {
    const auto& d = *models_->duration;
    p["next_duration_min"] = predict_duration(d, d.window(rows_, end), d.query(next.row(0)));
  }
  if (models_->long_intention && models_->intentions.size() > 0) {
    const auto& li = *models_->long_intention;
    const auto k = std::min(kDefaultListSize, models_->intentions.size());
    const auto ranked = predict_long_intentions(li, li.window(rows_, end), li.query(next.row(0)),
                                                models_->intentions, k);
    auto list = nlohmann::json::array();
    for (const auto& r : ranked) list.push_back({{"text", r.text}, {"similarity", r.similarity}});
    p["long_list"] = list;
  }
  if (models_->short_intention && end > 0 && models_->intentions.size() > 0) {
    const auto& si = *models_->short_intention;
    const auto emb = predict_short_intention(si, si.window(rows_, end - 1), si.query(rows_.row(end - 1)));
    const auto best = models_->intentions.top(emb, 1).front();
    p["short_intention"] = {{"text", best.text}, {"similarity", best.similarity}};
  }
  predictions_ = std::move(p);
}

nlohmann::json Session::state_json() const {
  nlohmann::json state;
  lsti::to_json(state, state_);
  const std::size_t keep = kLongWindow - 1;
  const std::size_t from = log_.events.size() > keep ? log_.events.size() - keep : 0;
  auto window = nlohmann::json::array();
  for (std::size_t i = from; i < log_.events.size(); ++i) {
    nlohmann::json e;
    lsti::to_json(e, log_.events[i]);
    window.push_back(std::move(e));
  }
  return {{"v", kSchemaVersion},
          {"session", info_.to_json()},
          {"config_fingerprint", log_.config_fingerprint},
          {"events", log_.events.size()},
          {"state", state},
          {"window", window}};
}

nlohmann::json Session::predictions_json() const { return predictions_; }

nlohmann::json Session::conflicts_json() const {
  auto pending = nlohmann::json::array();
  for (const auto& r : reports_) {
    if (r.r_conf == 1) pending.push_back(report_json(r));
  }
  nlohmann::json j{{"v", kSchemaVersion}, {"conflicts", pending}, {"evaluated", reports_.size()}};
  j["latest"] = reports_.empty() ? nlohmann::json(nullptr) : report_json(reports_.back());
  return j;
}

// ------------------------------------------------------------------ store

SessionStore::SessionStore(std::filesystem::path dir, WorldConfig config,
                           std::shared_ptr<ModelRegistry> registry)
    : dir_(std::move(dir)), config_(std::move(config)), registry_(std::move(registry)) {
  config_.validate();
  std::filesystem::create_directories(dir_);
}

std::filesystem::path SessionStore::file_of(const std::string& id) const {
  const bool ok = !id.empty() && id.size() <= 64 &&
                  std::all_of(id.begin(), id.end(), [](unsigned char c) {
                    return std::isalnum(c) || c == '-' || c == '_';
                  });
  if (!ok) throw FormatError("session id must be 1-64 characters of [A-Za-z0-9_-]");
  return dir_ / (id + ".jsonl");
}

std::shared_ptr<const ModelSet> SessionStore::models_for(const std::string& participant) {
  return registry_ ? registry_->get(participant) : nullptr;
}

std::shared_ptr<SessionStore::Slot> SessionStore::slot(const std::string& id) {
  std::lock_guard lock(mu_);
  const auto it = slots_.find(id);
  if (it == slots_.end()) {
    throw NotFoundError("unknown session '" + id + "'" +
                        (std::filesystem::exists(file_of(id)) ? "; POST its resume endpoint" : ""));
  }
  return it->second;
}

nlohmann::json SessionStore::create(const nlohmann::json& body) {
  auto info = SessionInfo::from_json(body.is_null() ? nlohmann::json::object() : body);
  auto models = models_for(info.participant);
  auto s = std::make_shared<Slot>();
  std::unique_lock slot_lock(s->mu);
  {
    std::lock_guard lock(mu_);
    if (info.id.empty()) {
      do {
        char buf[16];
        std::snprintf(buf, sizeof buf, "s%04zu", next_id_++);
        info.id = buf;
      } while (slots_.contains(info.id) || std::filesystem::exists(file_of(info.id)));
    } else if (slots_.contains(info.id) || std::filesystem::exists(file_of(info.id))) {
      throw FormatError("session '" + info.id + "' already exists");
    }
    slots_.emplace(info.id, s);
  }
  try {
    const auto file = file_of(info.id);
    s->session.emplace(Session::create(file, std::move(info), config_, std::move(models)));
  } catch (...) {
    std::lock_guard lock(mu_);
    for (auto it = slots_.begin(); it != slots_.end(); ++it) {
      if (it->second == s) {
        slots_.erase(it);
        break;
      }
    }
    throw;
  }
  return s->session->state_json();
}

nlohmann::json SessionStore::state(const std::string& id) {
  auto s = slot(id);
  std::shared_lock lock(s->mu);
  return s->session->state_json();
}

nlohmann::json SessionStore::post_action(const std::string& id, const nlohmann::json& body) {
  const auto request = ActionRequest::from_json(body);
  auto s = slot(id);
  std::unique_lock lock(s->mu);
  const auto& obs = s->session->post_action(request);
  nlohmann::json event;
  lsti::to_json(event, obs);
  return {{"v", kSchemaVersion},
          {"event", event},
          {"events", s->session->log().events.size()},
          {"predictions", s->session->predictions_json()},
          {"conflicts", s->session->conflicts_json()}};
}

nlohmann::json SessionStore::predictions(const std::string& id) {
  auto s = slot(id);
  std::shared_lock lock(s->mu);
  return s->session->predictions_json();
}

nlohmann::json SessionStore::conflicts(const std::string& id) {
  auto s = slot(id);
  std::shared_lock lock(s->mu);
  return s->session->conflicts_json();
}

nlohmann::json SessionStore::resume(const std::string& id) {
  const auto file = file_of(id);
  std::shared_ptr<Slot> s;
  {
    std::lock_guard lock(mu_);
    auto& entry = slots_[id];
    if (!entry) entry = std::make_shared<Slot>();
    s = entry;
  }
  std::unique_lock lock(s->mu);
  try {
    std::string participant = "base";
    if (s->session) {
      participant = s->session->info().participant;
    } else if (std::filesystem::exists(file)) {
      std::ifstream in(file);
      std::string header;
      std::getline(in, header);
      try {
        participant = nlohmann::json::parse(header).at("session").value("participant", "base");
      } catch (const nlohmann::json::exception& e) {
        throw FormatError(file.string() + ": bad header: " + e.what());
      }
    }
    s->session.emplace(Session::resume(file, config_, models_for(participant)));
  } catch (...) {
    if (!s->session) {
      std::lock_guard g(mu_);
      slots_.erase(id);
    }
    throw;
  }
  return s->session->state_json();
}

ObservationLog SessionStore::export_log(const std::string& id) {
  auto s = slot(id);
  std::shared_lock lock(s->mu);
  return s->session->log();
}

}  // namespace lsti
