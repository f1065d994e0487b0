#include "aed/analyst/analyst_env.hpp"

#include <algorithm>
#include <cmath>

#include "aed/user/pointing.hpp"

namespace aed {

double discrepancy(std::span<const double> truth, std::span<const double> estimate) {
  if (truth.size() != estimate.size()) {
    throw std::invalid_argument("discrepancy: truth has " + std::to_string(truth.size()) + " entries, estimate " +
                                std::to_string(estimate.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) s += std::abs(truth[i] - estimate[i]);
  return -s;
}

Vector squash_design(const ExperimentTask& task, const Vector& raw) {
  if (static_cast<std::size_t>(raw.size()) != task.design_dim()) {
    throw std::invalid_argument("squash_design: expected " + std::to_string(task.design_dim()) + " components");
  }
  Vector d(raw.size());
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    const Range r = task.design_range(static_cast<std::size_t>(i));
    d[i] = r.lo + r.width() / (1.0 + std::exp(-raw[i]));
  }
  return d;
}

Vector clip_design(const ExperimentTask& task, const Vector& design, bool* clipped) {
  if (static_cast<std::size_t>(design.size()) != task.design_dim()) {
    throw std::invalid_argument("design has " + std::to_string(design.size()) + " components, expected " +
                                std::to_string(task.design_dim()));
  }
  Vector d = design;
  bool moved = false;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const Range r = task.design_range(static_cast<std::size_t>(i));
    if (!std::isfinite(d[i])) throw std::invalid_argument("design component is not finite");
    const double c = std::clamp(d[i], r.lo, r.hi);
    moved |= c != d[i];
    d[i] = c;
  }
  if (clipped != nullptr) *clipped = moved;
  return d;
}

Vector sample_design(const ExperimentTask& task, Rng& rng) {
  Vector d(static_cast<Eigen::Index>(task.design_dim()));
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const Range r = task.design_range(static_cast<std::size_t>(i));
    d[i] = uniform(rng, r.lo, r.hi);
  }
  return d;
}

AnalystEpisode analyst_reset(const ExperimentTask& task, Rng& rng, const AnalystEnvConfig& cfg) {
  if (cfg.experiments == 0) throw std::invalid_argument("analyst: experiments must be positive");
  AnalystEpisode ep;
  ep.latent = task.sample_latent(rng);
  ep.experiments = cfg.experiments;
  ep.mask_outcomes = cfg.mask_outcomes;
  return ep;
}

namespace {

void push_record(const ExperimentTask& task, AnalystEpisode& ep, EncodedRecord rec, ExperimentLog log) {
  auto ptr = std::make_shared<const EncodedRecord>(std::move(rec));
  ep.records.push_back(ptr);
  ep.log.push_back(std::move(log));
  if (!ep.mask_outcomes) {
    ep.visible.push_back(ptr);
  } else if (ep.done()) {
    ep.visible = ep.records;
  } else {
    ep.visible.push_back(std::make_shared<const EncodedRecord>(task.mask(*ptr)));
  }
}

}  // namespace

void run_experiment(const ExperimentTask& task, AnalystEpisode& ep, const Vector& design, Rng& rng,
                    bool keep_outcome) {
  if (ep.done()) throw StepError("analyst_step: episode already has all its experiments");
  ExperimentLog log;
  log.design = clip_design(task, design, &log.clipped);
  EncodedRecord rec = task.run(ep.latent, log.design, rng, keep_outcome ? &log.outcome : nullptr);
  push_record(task, ep, std::move(rec), std::move(log));
}

void append_outcome(const ExperimentTask& task, AnalystEpisode& ep, const Vector& design,
                    const nlohmann::json& outcome) {
  if (ep.done()) throw StepError("analyst_step: episode already has all its experiments");
  ExperimentLog log;
  log.design = clip_design(task, design, &log.clipped);
  log.outcome = outcome;
  EncodedRecord rec = task.encode(log.design, outcome);
  push_record(task, ep, std::move(rec), std::move(log));
}

AnalystStepResult analyst_step(const ExperimentTask& task, AnalystEpisode& ep, const AnalystAction& action,
                               Rng& rng) {
  run_experiment(task, ep, action.design, rng);
  AnalystStepResult out;
  out.observation = ep.observation();
  out.reward = task.reward(ep.latent, action.estimate, ep.records);
  out.done = ep.done();
  return out;
}

Vector analyst_estimate(const SetPolicy& policy, const AnalystObservation& obs) {
  const AnalystObservation* p = &obs;
  const auto b = policy.forward_batch(std::span<const AnalystObservation* const>(&p, 1));
  return b.out.estimate.row(0).transpose().cwiseMax(0.0).cwiseMin(1.0);
}

AnalystDecision analyst_act(const SetPolicy& policy, const ExperimentTask& task, const AnalystObservation& obs,
                            SampleMode mode, Rng& rng) {
  const ActOutput a = act(policy, obs, rng, mode);
  AnalystDecision d;
  d.raw = a.action;
  d.log_prob = a.log_prob;
  d.value = a.value;
  d.action.design = squash_design(task, a.action);
  d.action.estimate = a.estimate.cwiseMax(0.0).cwiseMin(1.0);
  return d;
}

AnalystEnv::AnalystEnv(std::shared_ptr<const ExperimentTask> task, const AnalystEnvConfig& cfg, std::uint64_t seed,
                       const SetPolicy* estimator)
    : task_(std::move(task)), cfg_(cfg), rng_(seed), estimator_(estimator) {
  if (!task_) throw std::invalid_argument("AnalystEnv: no task");
  if (task_->estimate_dim() > 0 && estimator_ == nullptr) {
    throw std::invalid_argument("AnalystEnv: task '" + task_->name() + "' needs an estimator for its rewards");
  }
}

AnalystEnv::Observation AnalystEnv::reset() {
  ep_ = analyst_reset(*task_, rng_, cfg_);
  return ep_.observation();
}

StepResult<AnalystEnv::Observation> AnalystEnv::step(const Vector& action) {
  const Vector design = cfg_.random_designs ? sample_design(*task_, rng_) : squash_design(*task_, action);
  run_experiment(*task_, ep_, design, rng_);
  StepResult<Observation> out;
  out.observation = ep_.observation();
  const Vector est = estimator_ != nullptr ? analyst_estimate(*estimator_, out.observation) : Vector();
  out.reward = task_->reward(ep_.latent, est, ep_.records);
  out.done = ep_.done();
  return out;
}

Vector AnalystEnv::supervision_target() const { return task_->target(ep_.latent); }

double AnalystRollout::total_reward() const {
  double s = 0.0;
  for (double r : rewards) s += r;
  return s;
}

namespace {

AnalystRollout rollout_from(const SetPolicy& policy, const ExperimentTask& task, bool random_designs,
                            AnalystEpisode ep, Rng& rng, SampleMode mode, bool keep_outcomes) {
  AnalystRollout out;
  out.episode = std::move(ep);
  AnalystEpisode& e = out.episode;
  AnalystDecision d = analyst_act(policy, task, e.observation(), mode, rng);
  out.estimates.push_back(d.action.estimate);
  while (!e.done()) {
    const Vector design = random_designs ? sample_design(task, rng) : d.action.design;
    run_experiment(task, e, design, rng, keep_outcomes);
    d = analyst_act(policy, task, e.observation(), mode, rng);
    out.estimates.push_back(d.action.estimate);
    out.rewards.push_back(task.reward(e.latent, d.action.estimate, e.records));
  }
  return out;
}

}  // namespace

AnalystRollout rollout_analyst(const SetPolicy& policy, const ExperimentTask& task, const AnalystEnvConfig& cfg,
                               Rng& rng, SampleMode mode, bool keep_outcomes) {
  AnalystEpisode ep = analyst_reset(task, rng, cfg);
  return rollout_from(policy, task, cfg.random_designs, std::move(ep), rng, mode, keep_outcomes);
}

AnalystRollout rollout_analyst_at(const SetPolicy& policy, const ExperimentTask& task, const AnalystEnvConfig& cfg,
                                  const Vector& latent, Rng& rng, SampleMode mode, bool keep_outcomes) {
  if (cfg.experiments == 0) throw std::invalid_argument("analyst: experiments must be positive");
  AnalystEpisode ep;
  ep.latent = latent;
  ep.experiments = cfg.experiments;
  ep.mask_outcomes = cfg.mask_outcomes;
  return rollout_from(policy, task, cfg.random_designs, std::move(ep), rng, mode, keep_outcomes);
}

nlohmann::json to_json(const AnalystEnvConfig& c) {
  return {{"experiments", c.experiments}, {"mask_outcomes", c.mask_outcomes}, {"random_designs", c.random_designs}};
}

AnalystEnvConfig env_config_from_json(const nlohmann::json& j, const AnalystEnvConfig& base) {
  AnalystEnvConfig c = base;
  for (const auto& [k, v] : j.items()) {
    if (k == "experiments") c.experiments = v.get<std::size_t>();
    else if (k == "mask_outcomes") c.mask_outcomes = v.get<bool>();
    else if (k == "random_designs") c.random_designs = v.get<bool>();
    else throw std::invalid_argument("analyst env: unknown key '" + k + "'");
  }
  if (c.experiments == 0) throw std::invalid_argument("analyst env.experiments: must be positive");
  return c;
}

void save_analyst(const SetPolicy& policy, const ExperimentTask& task, const AnalystEnvConfig& env,
                  const std::filesystem::path& path) {
  Checkpoint ckpt;
  ckpt.meta = {{"kind", "analyst"}, {"dims", to_json(policy.dims())}, {"env", to_json(env)}, {"task", task.describe()}};
  policy.store(ckpt, "analyst");
  save_checkpoint(ckpt, path);
}

AnalystCheckpoint load_analyst(const std::filesystem::path& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  try {
    if (ckpt.meta.value("kind", "") != "analyst") throw CheckpointError("not an analyst checkpoint");
    const SetPolicyDims dims = set_dims_from_json(ckpt.meta.at("dims"));
    return {SetPolicy::restore(ckpt, "analyst", dims), env_config_from_json(ckpt.meta.at("env"), {}),
            ckpt.meta.at("task")};
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  } catch (const std::exception& e) {
    throw CheckpointError(path.string() + ": malformed analyst checkpoint (" + e.what() + ")");
  }
}

void check_compatible(const AnalystCheckpoint& ckpt, const ExperimentTask& task) {
  const std::string want = task.name();
  const std::string have = ckpt.task.value("task", "");
  if (have != want) throw CheckpointError("analyst checkpoint is for task '" + have + "', not '" + want + "'");
  const SetPolicyDims& d = ckpt.policy.dims();
  const RecordLayout l = task.layout();
  if (d.layout.flat_dim != l.flat_dim || d.layout.pair_dim != l.pair_dim || d.action_dim != task.design_dim() ||
      d.estimate_dim != task.estimate_dim()) {
    throw CheckpointError("analyst checkpoint dimensions do not match task '" + want + "'");
  }
}

SetPolicyDims default_analyst_dims(const ExperimentTask& task, Architecture arch, std::size_t experiments) {
  SetPolicyDims d;
  d.architecture = arch;
  d.layout = task.layout();
  d.action_dim = task.design_dim();
  d.estimate_dim = task.estimate_dim();
  d.max_records = experiments;
  return d;
}

TrainedAnalyst train_analyst(std::shared_ptr<const ExperimentTask> task, const AnalystTrainingConfig& cfg) {
  SetPolicyDims dims = cfg.dims;
  dims.layout = task->layout();
  dims.action_dim = task->design_dim();
  dims.estimate_dim = task->estimate_dim();
  dims.max_records = cfg.env.experiments;
  Rng init(derive_seed(cfg.seed, 0xA7A1));
  TrainedAnalyst out{SetPolicy(dims, init), SetPolicy(), {}};
  out.shadow = out.policy;

  std::vector<AnalystEnv> envs;
  for (std::size_t i = 0; i < cfg.ppo.n_envs; ++i) envs.emplace_back(task, cfg.env, derive_seed(cfg.seed, 200 + i), &out.shadow);
  VecEnv<AnalystEnv> vec(std::move(envs), derive_seed(cfg.seed, 9));
  TrainOptions opts;
  opts.ppo = cfg.ppo;
  opts.rollout.workers = cfg.workers;
  opts.seed = cfg.seed;
  opts.metrics = cfg.metrics;
  out.result = train_ppo(out.policy, vec, opts, &out.shadow);
  return out;
}

}  // namespace aed
