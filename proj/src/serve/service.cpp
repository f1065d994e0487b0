#include "aed/serve/service.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "aed/numerics/checkpoint.hpp"

namespace aed {
namespace {

using nlohmann::json;

const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) throw SchemaError(path + key, "missing");
  return j.at(key);
}

double number(const json& v, const std::string& field) {
  if (!v.is_number()) throw SchemaError(field, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw SchemaError(field, "must be finite");
  return x;
}

double coordinate(const json& v, const std::string& field) {
  const double x = number(v, field);
  if (x < -1.0 || x > 1.0) throw SchemaError(field, "outside the display range [-1, 1]");
  return x;
}

std::array<double, 2> point(const json& v, const std::string& field) {
  if (!v.is_array() || v.size() != 2) throw SchemaError(field, "expected [x, y]");
  return {coordinate(v[0], field + "[0]"), coordinate(v[1], field + "[1]")};
}

double seconds(const json& v, const std::string& field) {
  const double x = number(v, field);
  if (x < 0.0) throw SchemaError(field, "must be >= 0 seconds");
  return x;
}

bool flag(const json& v, const std::string& field) {
  if (!v.is_boolean()) throw SchemaError(field, "expected true or false");
  return v.get<bool>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys) {
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* key : keys) ok = ok || k == key;
    if (!ok) throw SchemaError(k, "unknown field");
  }
}

std::string fresh_token() {
  static std::mt19937_64 gen{std::random_device{}()};
  static std::mutex mu;
  std::lock_guard lock(mu);
  std::ostringstream s;
  s << std::hex << gen();
  return s.str();
}

}  // namespace

EpisodeTrace trace_from_payload(Study study, const Design& design, const json& p) {
  if (!p.is_object()) throw SchemaError("$", "expected a JSON object");
  EpisodeTrace t;
  t.design = design;
  const auto target = point(require(p, "target", ""), "target");
  t.target_x = target[0];
  t.target_y = target[1];
  t.total_time = seconds(require(p, "movement_time", ""), "movement_time");
  if (study == Study::One) {
    reject_unknown(p, {"trial", "target", "click", "movement_time"});
    t.fixations.push_back(point(require(p, "click", ""), "click"));
    t.durations.push_back(t.total_time);
    t.detected.push_back(0);
    t.steps = 1;
    return t;
  }
  reject_unknown(p, {"trial", "target", "fixations", "durations", "movement_time", "success", "keypress"});
  const json& fx = require(p, "fixations", "");
  const json& du = require(p, "durations", "");
  if (!fx.is_array()) throw SchemaError("fixations", "expected a list of [x, y]");
  if (!du.is_array()) throw SchemaError("durations", "expected a list of seconds");
  if (du.size() != fx.size()) throw SchemaError("durations", "must have one entry per fixation");
  for (std::size_t i = 0; i < fx.size(); ++i) {
    t.fixations.push_back(point(fx[i], "fixations[" + std::to_string(i) + "]"));
    t.durations.push_back(seconds(du[i], "durations[" + std::to_string(i) + "]"));
    t.detected.push_back(0);
  }
  t.success = flag(require(p, "success", ""), "success");
  const bool key = p.contains("keypress") ? flag(p["keypress"], "keypress") : false;
  if (key && study != Study::Three) throw SchemaError("keypress", "only Study 3 has a keypress");
  if (key) t.keypress_step = static_cast<int>(t.fixations.size());
  t.steps = static_cast<int>(t.fixations.size()) + (key ? 1 : 0);
  return t;
}

json payload_from_trace(Study study, const EpisodeTrace& t, std::size_t trial) {
  json p = {{"trial", trial}, {"target", {t.target_x, t.target_y}}, {"movement_time", t.total_time}};
  if (study == Study::One) {
    const auto last = t.fixations.empty() ? std::array<double, 2>{0.0, 0.0} : t.fixations.back();
    p["click"] = {last[0], last[1]};
    return p;
  }
  p["fixations"] = json::array();
  for (const auto& f : t.fixations) p["fixations"].push_back({f[0], f[1]});
  std::vector<double> d = t.durations;
  d.resize(t.fixations.size(), 0.0);
  p["durations"] = d;
  p["success"] = t.success;
  if (study == Study::Three) p["keypress"] = t.keypress_step.has_value();
  return p;
}

ServedModel load_served_model(const std::string& id, const std::filesystem::path& dir) {
  ServedModel m;
  m.id = id;
  std::shared_ptr<const UserModel> user;
  try {
    user = std::make_shared<const UserModel>(load_user_model(dir / "user.ckpt"));
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("user checkpoint: ") + e.what());
  }
  m.task = std::make_shared<const PointingTask>(user);
  AnalystCheckpoint a = load_analyst(dir / "analyst.ckpt");
  check_compatible(a, *m.task);
  m.policy = std::make_shared<const SetPolicy>(std::move(a.policy));
  m.env = a.env;
  return m;
}

json design_json(const Vector& d) { return {{"distance", d[0]}, {"width", d[1]}}; }

SessionService::SessionService(ServeConfig cfg, Clock clock) : cfg_(std::move(cfg)), clock_(std::move(clock)) {
  if (!clock_) clock_ = [] { return std::chrono::steady_clock::now(); };
}

void SessionService::add_model(ServedModel model) {
  std::lock_guard lock(mu_);
  const std::string id = model.id;
  models_.insert_or_assign(id, std::move(model));
}

std::vector<std::string> SessionService::model_ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> ids;
  for (const auto& [k, v] : models_) ids.push_back(k);
  return ids;
}

json SessionService::create_session(int study, const std::string& checkpoint) {
  auto s = std::make_shared<Session>();
  {
    std::lock_guard lock(mu_);
    auto it = models_.find(checkpoint);
    if (it == models_.end()) throw NotFoundError("unknown checkpoint '" + checkpoint + "'");
    if (to_int(it->second.task->study()) != study) {
      throw SchemaError("study", "checkpoint '" + checkpoint + "' serves study " +
                                     std::to_string(to_int(it->second.task->study())));
    }
    s->model = &it->second;
    s->id = "s" + std::to_string(++counter_) + "-" + fresh_token();
    s->rng = Rng(derive_seed(cfg_.seed, counter_));
  }
  const ServedModel& m = *s->model;
  s->episode.experiments = m.env.experiments;
  s->episode.mask_outcomes = m.env.mask_outcomes;
  const SampleMode mode = cfg_.sample_actions ? SampleMode::Stochastic : SampleMode::Deterministic;
  s->next_design = analyst_act(*m.policy, *m.task, s->episode.observation(), mode, s->rng).action.design;
  s->estimate = Vector::Constant(static_cast<Eigen::Index>(m.task->estimate_dim()), 0.5);
  s->created = s->touched = clock_();
  {
    std::lock_guard lock(mu_);
    sessions_[s->id] = s;
  }
  return {{"session_id", s->id},
          {"study", study},
          {"checkpoint", checkpoint},
          {"trial", 0},
          {"experiments", m.env.experiments},
          {"design", design_json(s->next_design)}};
}

std::shared_ptr<SessionService::Session> SessionService::find(const std::string& id) {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
  return it->second;
}

json SessionService::estimate_json(const Session& s) const {
  const PointingTask& task = *s.model->task;
  json names = json::array();
  for (auto id : task.estimated()) names.push_back(std::string(param_name(id)));
  const Vector raw = task.denormalise(s.estimate);
  return {{"names", names},
          {"normalised", std::vector<double>(s.estimate.data(), s.estimate.data() + s.estimate.size())},
          {"values", std::vector<double>(raw.data(), raw.data() + raw.size())}};
}

json SessionService::submit_outcome(const std::string& session_id, const json& payload) {
  auto s = find(session_id);
  std::unique_lock lock(s->mu, std::try_to_lock);
  if (!lock.owns_lock()) throw ConflictError("session '" + session_id + "' has a request in flight");
  const ServedModel& m = *s->model;
  const std::size_t trial = s->episode.records.size();
  if (s->episode.done()) throw ConflictError("session '" + session_id + "' is already done");
  if (!payload.is_object()) throw SchemaError("$", "expected a JSON object");
  const json& tr = require(payload, "trial", "");
  if (!tr.is_number_unsigned() && !(tr.is_number_integer() && tr.get<long long>() >= 0)) {
    throw SchemaError("trial", "expected a non-negative integer");
  }
  if (tr.get<std::size_t>() != trial) {
    throw ConflictError("expected trial " + std::to_string(trial) + ", got " + std::to_string(tr.get<std::size_t>()));
  }
  const Design design{s->next_design[0], s->next_design[1]};
  EpisodeTrace trace = trace_from_payload(m.task->study(), design, payload);
  if (trace.fixations.size() > static_cast<std::size_t>(m.task->user().config.max_steps)) {
    throw SchemaError("fixations", "more than " + std::to_string(m.task->user().config.max_steps) + " fixations");
  }

  append_outcome(*m.task, s->episode, s->next_design, to_json(trace));
  s->traces.push_back(std::move(trace));
  const SampleMode mode = cfg_.sample_actions ? SampleMode::Stochastic : SampleMode::Deterministic;
  const AnalystAction a = analyst_act(*m.policy, *m.task, s->episode.observation(), mode, s->rng).action;
  s->estimate = a.estimate;
  s->touched = clock_();
  json out = {{"session_id", s->id}, {"trial", trial + 1}, {"done", s->episode.done()}};
  if (s->episode.done()) {
    export_session(*s);
  } else {
    s->next_design = a.design;
    out["design"] = design_json(a.design);
  }
  out["estimate"] = estimate_json(*s);
  return out;
}

json SessionService::get_estimate(const std::string& session_id) {
  auto s = find(session_id);
  std::lock_guard lock(s->mu);
  s->touched = clock_();
  return {{"session_id", s->id},
          {"trial", s->episode.records.size()},
          {"done", s->episode.done()},
          {"estimate", estimate_json(*s)}};
}

void SessionService::export_session(const Session& s) const {
  if (!cfg_.export_dir) return;
  std::filesystem::create_directories(*cfg_.export_dir);
  std::ofstream f(*cfg_.export_dir / (s.id + ".jsonl"));
  for (const auto& t : s.traces) f << to_json(t, s.id).dump() << '\n';
}

std::size_t SessionService::expire() {
  const auto now = clock_();
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    std::unique_lock slock(it->second->mu, std::try_to_lock);
    if (slock.owns_lock() && now - it->second->touched > cfg_.idle_expiry) {
      slock.unlock();
      it = sessions_.erase(it);
      ++n;
    } else {
      ++it;
    }
  }
  return n;
}

std::size_t SessionService::session_count() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

}  // namespace aed
