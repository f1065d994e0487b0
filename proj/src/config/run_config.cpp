#include "aed/config/run_config.hpp"

#include <cmath>
#include <fstream>

namespace aed {
namespace {

std::size_t iterations_of(const PpoConfig& p) {
  const std::size_t per = p.n_steps * p.n_envs;
  return std::max<std::size_t>(1, (p.total_steps + per - 1) / per);
}

// Exponential decay reaching `fraction` of the start by the last iteration.
double decay_to(const PpoConfig& p, double fraction) {
  return std::pow(fraction, 1.0 / static_cast<double>(iterations_of(p)));
}

nlohmann::json controller_widths(const MlpPolicyDims& d) {
  return {{"trunk", d.trunk}, {"head", d.head}, {"initial_log_std", d.initial_log_std}};
}

MlpPolicyDims controller_widths_from_json(const nlohmann::json& j, const MlpPolicyDims& base) {
  MlpPolicyDims d = base;
  for (const auto& [k, v] : j.items()) {
    if (k == "trunk") d.trunk = v.get<std::vector<std::size_t>>();
    else if (k == "head") d.head = v.get<std::vector<std::size_t>>();
    else if (k == "initial_log_std") d.initial_log_std = v.get<double>();
    else throw std::invalid_argument("user.network: unknown key '" + k + "'");
  }
  return d;
}

std::vector<double> grid_over(Range r, std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = r.lo + r.width() * static_cast<double>(i) / static_cast<double>(n - 1);
  return g;
}

// Prefix nested errors with the section they came from.
template <class F>
auto section(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    const std::string what = e.what();
    if (what.rfind(name + ".", 0) == 0 || what.rfind(name + ":", 0) == 0) throw;
    throw std::invalid_argument(name + "." + what);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(name + ": " + e.what());
  }
}

}  // namespace

std::string to_string(Profile p) { return p == Profile::Desk ? "desk" : "paper"; }

Profile profile_from_string(const std::string& s) {
  if (s == "desk") return Profile::Desk;
  if (s == "paper") return Profile::Paper;
  throw std::invalid_argument("profile: expected 'desk' or 'paper', got '" + s + "'");
}

RunConfig default_run_config(Study study, Profile profile) {
  const bool desk = profile == Profile::Desk;
  RunConfig c;
  c.study = study;
  c.profile = profile;
  c.pointing.study = study;
  c.prior = default_prior(study);

  c.user.dims = default_controller_dims(study);
  PpoConfig& u = c.user.ppo;  // learning rate, gamma, clip, entropy, grad norm: PpoConfig defaults
  u.total_steps = desk ? (study == Study::Three ? 2'000'000 : 300'000) : 3'000'000;
  u.target_kl = 0.02;
  u.lr_end_fraction = 0.1;

  c.analyst.env.experiments = 4;
  c.analyst.dims.architecture = study == Study::One ? Architecture::Pooled : Architecture::Relational;
  PpoConfig& a = c.analyst.ppo;
  a.learning_rate = desk ? 2e-4 : 5e-5;
  a.clip_range = 0.10;
  a.ent_coef = 0.01;
  a.total_steps = desk ? (study == Study::One ? 200'000 : 600'000) : 4'000'000;
  a.segment_length = c.analyst.env.experiments;
  a.ema_alpha = 0.9;
  a.lr_decay = decay_to(a, 0.1);

  c.eval.behaviour_param = study == Study::One   ? ParamId::RhoOcular
                           : study == Study::Two ? ParamId::RhoSpatial
                                                 : ParamId::ThetaPref;
  c.eval.behaviour_grid = grid_over(c.prior[c.eval.behaviour_param], 6);
  c.demo = desk ? desk_demo_config() : paper_demo_config();
  return c;
}

nlohmann::json to_json(const RunConfig& c) {
  return {{"study", to_int(c.study)},
          {"profile", to_string(c.profile)},
          {"seed", c.seed},
          {"workers", c.workers},
          {"out_dir", c.out_dir},
          {"pointing", to_json(c.pointing)},
          {"prior", to_json(c.prior)},
          {"user", {{"network", controller_widths(c.user.dims)}, {"ppo", to_json(c.user.ppo)}}},
          {"analyst",
           {{"network", widths_to_json(c.analyst.dims)},
            {"env", to_json(c.analyst.env)},
            {"ppo", to_json(c.analyst.ppo)},
            {"observation_noise", c.analyst.task.observation_noise}}},
          {"eval",
           {{"episodes", c.eval.episodes},
            {"behaviour_episodes", c.eval.behaviour_episodes},
            {"histogram_bins", c.eval.histogram_bins},
            {"behaviour_param", std::string(param_name(c.eval.behaviour_param))},
            {"behaviour_grid", c.eval.behaviour_grid},
            {"seed", c.eval.seed}}},
          {"demo", to_json(c.demo)}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
  const Study study = j.contains("study") ? study_from_int(j.at("study").get<int>()) : Study::One;
  const Profile profile = j.contains("profile") ? profile_from_string(j.at("profile").get<std::string>()) : Profile::Desk;
  return run_config_from_json(j, default_run_config(study, profile));
}

RunConfig run_config_from_json(const nlohmann::json& j, const RunConfig& base) {
  if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
  RunConfig c = base;
  bool grid_given = false;
  for (const auto& [k, v] : j.items()) {
    if (k == "study") {
      c.study = study_from_int(v.get<int>());
      c.pointing.study = c.study;
    } else if (k == "profile") c.profile = profile_from_string(v.get<std::string>());
    else if (k == "seed") c.seed = v.get<std::uint64_t>();
    else if (k == "workers") {
      c.workers = v.get<int>();
      if (c.workers < 1) throw std::invalid_argument("workers: must be >= 1");
    } else if (k == "out_dir") c.out_dir = v.get<std::string>();
    else if (k == "pointing") c.pointing = section("pointing", [&] { return pointing_config_from_json(v, c.pointing); });
    else if (k == "prior") c.prior = section("prior", [&] { return prior_from_json(v, c.prior); });
    else if (k == "user") {
      for (const auto& [uk, uv] : v.items()) {
        if (uk == "network") c.user.dims = section("user", [&] { return controller_widths_from_json(uv, c.user.dims); });
        else if (uk == "ppo") c.user.ppo = section("user", [&] { return ppo_config_from_json(uv, c.user.ppo); });
        else throw std::invalid_argument("user: unknown key '" + uk + "'");
      }
    } else if (k == "analyst") {
      for (const auto& [ak, av] : v.items()) {
        if (ak == "network") c.analyst.dims = section("analyst", [&] { return widths_from_json(av, c.analyst.dims); });
        else if (ak == "env") c.analyst.env = section("analyst", [&] { return env_config_from_json(av, c.analyst.env); });
        else if (ak == "ppo") c.analyst.ppo = section("analyst", [&] { return ppo_config_from_json(av, c.analyst.ppo); });
        else if (ak == "observation_noise") c.analyst.task.observation_noise = av.get<double>();
        else throw std::invalid_argument("analyst: unknown key '" + ak + "'");
      }
    } else if (k == "eval") {
      for (const auto& [ek, ev] : v.items()) {
        if (ek == "episodes") c.eval.episodes = ev.get<std::size_t>();
        else if (ek == "behaviour_episodes") c.eval.behaviour_episodes = ev.get<std::size_t>();
        else if (ek == "histogram_bins") c.eval.histogram_bins = ev.get<std::size_t>();
        else if (ek == "behaviour_param") c.eval.behaviour_param = param_from_name(ev.get<std::string>());
        else if (ek == "behaviour_grid") {
          c.eval.behaviour_grid = ev.get<std::vector<double>>();
          grid_given = true;
        } else if (ek == "seed") c.eval.seed = ev.get<std::uint64_t>();
        else throw std::invalid_argument("eval: unknown key '" + ek + "'");
      }
    } else if (k == "demo") c.demo = section("demo", [&] { return demo_config_from_json(v, c.demo); });
    else throw std::invalid_argument("config: unknown key '" + k + "'");
  }
  if (c.pointing.study != c.study) throw std::invalid_argument("pointing.study: disagrees with study");
  if (c.eval.episodes == 0) throw std::invalid_argument("eval.episodes: must be positive");
  if (c.eval.histogram_bins == 0) throw std::invalid_argument("eval.histogram_bins: must be positive");
  if (!grid_given && j.contains("prior")) c.eval.behaviour_grid = grid_over(c.prior[c.eval.behaviour_param], 6);
  validate(c.prior);
  return c;
}

nlohmann::json read_config_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("config: cannot read " + path.string());
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("config: " + path.string() + " is not valid JSON (" + e.what() + ")");
  }
}

EnsembleTrainingConfig user_training_config(const RunConfig& c) {
  EnsembleTrainingConfig e;
  e.pointing = c.pointing;
  e.prior = c.prior;
  e.ppo = c.user.ppo;
  e.dims = c.user.dims;
  e.seed = c.seed;
  e.workers = c.workers;
  return e;
}

AnalystTrainingConfig analyst_training_config(const RunConfig& c, const ExperimentTask& task) {
  AnalystTrainingConfig a;
  a.dims = default_analyst_dims(task, c.analyst.dims.architecture, c.analyst.env.experiments);
  a.dims.encoder = c.analyst.dims.encoder;
  a.dims.global = c.analyst.dims.global;
  a.dims.trunk = c.analyst.dims.trunk;
  a.dims.head = c.analyst.dims.head;
  a.dims.initial_log_std = c.analyst.dims.initial_log_std;
  a.env = c.analyst.env;
  a.ppo = c.analyst.ppo;
  a.seed = derive_seed(c.seed, 0xA11A);
  a.workers = c.workers;
  return a;
}

}  // namespace aed
