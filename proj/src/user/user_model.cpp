#include "aed/user/user_model.hpp"

#include <numbers>

#include "aed/rl/trainer.hpp"

namespace aed {
namespace {

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

IntentFn policy_controller(const MlpPolicy& policy, Study study, SampleMode mode) {
  return [&policy, study, mode](const PointingState& s, const Belief& b, std::span<const double> input, Rng& rng) {
    const Vector x = Eigen::Map<const Vector>(input.data(), static_cast<Eigen::Index>(input.size()));
    Vector u = policy.mean_action(x);
    if (mode == SampleMode::Stochastic) {
      const Vector sd = clamped_log_std(policy.log_std()).array().exp();
      for (Eigen::Index i = 0; i < u.size(); ++i) u[i] += sd[i] * standard_normal(rng);
    }
    return intent_from_action(std::span<const double>(u.data(), static_cast<std::size_t>(u.size())), s, b, study);
  };
}

IntentFn random_controller(Study study) {
  return [study](const PointingState& s, const Belief& b, std::span<const double>, Rng& rng) {
    std::vector<double> u(controller_action_dim(study));
    for (auto& v : u) v = uniform(rng, -1.0, 1.0);
    return intent_from_action(u, s, b, study);
  };
}

IntentFn oracle_controller(Study study) {
  return [study](const PointingState& s, const Belief&, std::span<const double>, Rng&) {
    Intent in;
    in.aim_x = s.tx;
    in.aim_y = s.ty;
    in.keypress = study == Study::Three && inside_target(s);
    return in;
  };
}

EpisodeTrace run_episode(const IntentFn& controller, const PointingConfig& cfg, const Design& design,
                         const UserParams& params, Rng& rng, std::optional<double> angle) {
  const double a = angle ? *angle : uniform(rng, -std::numbers::pi, std::numbers::pi);
  PointingState s = reset_at(design, a);
  Belief b;
  EpisodeTrace t;
  t.design = design;
  t.angle = a;
  t.target_x = s.tx;
  t.target_y = s.ty;
  while (!s.terminated) {
    const auto input = controller_input(b, s, params, cfg);
    const Intent intent = controller(s, b, input, rng);
    const StepOutcome out = step(cfg, s, intent, params, rng);
    ++t.steps;
    t.total_reward += out.reward;
    if (out.keypress) {
      t.keypress_step = t.steps;
    } else {
      t.fixations.push_back({s.fx, s.fy});
      t.durations.push_back(out.duration);
      t.detected.push_back(out.obs.detected ? 1 : 0);
      t.total_time += out.duration;
      b = belief_update(b, out.obs);
    }
    if (out.done) {
      t.success = out.success;
      t.truncated = !out.success && !out.keypress;
    }
  }
  return t;
}

PointingTrainEnv::PointingTrainEnv(const PointingConfig& cfg, const Prior& prior, std::uint64_t seed)
    : cfg_(cfg), prior_(prior), rng_(seed) {
  validate(prior_);
}

Vector PointingTrainEnv::encode() const { return to_vector(controller_input(belief_, state_, params_, cfg_)); }

PointingTrainEnv::Observation PointingTrainEnv::reset() {
  params_ = sample_user_params(prior_, rng_, cfg_.study);
  const Design d = cfg_.design_space.sample(rng_);
  state_ = aed::reset(d, params_, rng_);
  belief_ = Belief{};
  return encode();
}

StepResult<PointingTrainEnv::Observation> PointingTrainEnv::step(const Vector& action) {
  const Intent intent = intent_from_action(
      std::span<const double>(action.data(), static_cast<std::size_t>(action.size())), state_, belief_, cfg_.study);
  const StepOutcome out = aed::step(cfg_, state_, intent, params_, rng_);
  if (!out.keypress) belief_ = belief_update(belief_, out.obs);
  return {encode(), out.reward, out.done};
}

MlpPolicyDims default_controller_dims(Study study) {
  MlpPolicyDims d;
  d.input_dim = kControllerInputDim;
  d.action_dim = controller_action_dim(study);
  d.estimate_dim = 0;
  d.trunk = {32, 64, 128, 128};
  d.head = {128, 64};
  return d;
}

UserModel train_ensemble(const EnsembleTrainingConfig& cfg) {
  validate(cfg.prior);
  MlpPolicyDims dims = cfg.dims;
  dims.input_dim = kControllerInputDim;
  dims.action_dim = controller_action_dim(cfg.pointing.study);
  dims.estimate_dim = 0;
  Rng init(derive_seed(cfg.seed, 0x1417));
  UserModel model{MlpPolicy(dims, init), cfg.pointing, cfg.prior, SampleMode::Deterministic};

  std::vector<PointingTrainEnv> envs;
  for (std::size_t i = 0; i < cfg.ppo.n_envs; ++i) envs.emplace_back(cfg.pointing, cfg.prior, derive_seed(cfg.seed, 100 + i));
  VecEnv<PointingTrainEnv> vec(std::move(envs), derive_seed(cfg.seed, 7));
  TrainOptions opts;
  opts.ppo = cfg.ppo;
  opts.rollout.workers = cfg.workers;
  opts.seed = cfg.seed;
  opts.metrics = cfg.metrics;
  train_ppo(model.policy, vec, opts);
  return model;
}

nlohmann::json to_json(const PointingConfig& c) {
  return {{"study", to_int(c.study)},
          {"max_steps", c.max_steps},
          {"termination_penalty", c.termination_penalty},
          {"kappa0", c.kappa0},
          {"kappa_w", c.kappa_w},
          {"kappa_e", c.kappa_e},
          {"sigma_floor", c.sigma_floor},
          {"design_space",
           {{"distance", {c.design_space.distance.lo, c.design_space.distance.hi}},
            {"width", {c.design_space.width.lo, c.design_space.width.hi}}}}};
}

PointingConfig pointing_config_from_json(const nlohmann::json& j, const PointingConfig& base) {
  PointingConfig c = base;
  for (const auto& [key, v] : j.items()) {
    if (key == "study") c.study = study_from_int(v.get<int>());
    else if (key == "max_steps") c.max_steps = v.get<int>();
    else if (key == "termination_penalty") c.termination_penalty = v.get<double>();
    else if (key == "kappa0") c.kappa0 = v.get<double>();
    else if (key == "kappa_w") c.kappa_w = v.get<double>();
    else if (key == "kappa_e") c.kappa_e = v.get<double>();
    else if (key == "sigma_floor") c.sigma_floor = v.get<double>();
    else if (key == "design_space") {
      for (const auto& [dk, dv] : v.items()) {
        if (dk == "distance") c.design_space.distance = {dv.at(0).get<double>(), dv.at(1).get<double>()};
        else if (dk == "width") c.design_space.width = {dv.at(0).get<double>(), dv.at(1).get<double>()};
        else throw std::invalid_argument("pointing.design_space: unknown key '" + dk + "'");
      }
    } else {
      throw std::invalid_argument("pointing: unknown key '" + key + "'");
    }
  }
  if (c.max_steps < 1) throw std::invalid_argument("pointing.max_steps: must be positive");
  const auto& ds = c.design_space;
  if (!(ds.distance.lo >= 0.0 && ds.distance.lo <= ds.distance.hi && ds.distance.hi <= 1.0)) {
    throw std::invalid_argument("pointing.design_space.distance: must satisfy 0 <= lo <= hi <= 1");
  }
  if (!(ds.width.lo > 0.0 && ds.width.lo <= ds.width.hi && ds.width.hi <= 1.0)) {
    throw std::invalid_argument("pointing.design_space.width: must satisfy 0 < lo <= hi <= 1");
  }
  return c;
}

void save_user_model(const UserModel& model, const std::filesystem::path& path) {
  Checkpoint ck;
  ck.meta = {{"kind", "user_controller"},
             {"pointing", to_json(model.config)},
             {"prior", to_json(model.prior)},
             {"dims", to_json(model.policy.dims())}};
  model.policy.store(ck, "");
  save_checkpoint(ck, path);
}

UserModel load_user_model(const std::filesystem::path& path) {
  const Checkpoint ck = load_checkpoint(path);
  if (ck.meta.value("kind", "") != "user_controller") {
    throw CheckpointError(path.string() + ": not a user-model checkpoint");
  }
  try {
    UserModel m{MlpPolicy::restore(ck, "", mlp_dims_from_json(ck.meta.at("dims"))),
                pointing_config_from_json(ck.meta.at("pointing"), PointingConfig{}),
                prior_from_json(ck.meta.at("prior"), default_prior(Study::Two)), SampleMode::Deterministic};
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": malformed metadata: " + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

}  // namespace aed
