#include "aed/demos/demo.hpp"

#include <fstream>
#include <iomanip>

namespace aed {
namespace {

constexpr const char* kNonmyopicFile = "nonmyopic.ckpt";
constexpr const char* kAdaptiveFile = "adaptive.ckpt";
constexpr const char* kNonAdaptiveFile = "non_adaptive.ckpt";
constexpr const char* kRandomFile = "random.ckpt";

std::vector<double> xs_of(const AnalystEpisode& ep) {
  std::vector<double> xs;
  for (const auto& r : ep.records) xs.push_back(r->flat[0]);
  return xs;
}

std::vector<double> ys_of(const AnalystEpisode& ep) {
  std::vector<double> ys;
  for (const auto& r : ep.records) ys.push_back(r->flat[1]);
  return ys;
}

AnalystEnvConfig adaptivity_env(const LogisticConfig& cfg, bool mask, bool random) {
  AnalystEnvConfig e;
  e.experiments = cfg.trials;
  e.mask_outcomes = mask;
  e.random_designs = random;
  return e;
}

AnalystCheckpoint load_for(const std::filesystem::path& path, const ExperimentTask& task) {
  if (!std::filesystem::exists(path)) throw CheckpointError("missing analyst checkpoint: " + path.string());
  AnalystCheckpoint ck = load_analyst(path);
  check_compatible(ck, task);
  return ck;
}

}  // namespace

std::string to_string(DemoKind k) { return k == DemoKind::Nonmyopic ? "nonmyopic" : "adaptivity"; }

DemoKind demo_kind_from_string(const std::string& s) {
  if (s == "nonmyopic") return DemoKind::Nonmyopic;
  if (s == "adaptivity") return DemoKind::Adaptivity;
  throw std::invalid_argument("unknown demo '" + s + "' (expected nonmyopic or adaptivity)");
}

DemoConfig desk_demo_config() {
  DemoConfig c;
  c.nonmyopic_dims.encoder = {32, 64};
  c.nonmyopic_dims.trunk = {64, 64};
  c.nonmyopic_dims.head = {64};
  c.nonmyopic_ppo.learning_rate = 3e-4;
  c.nonmyopic_ppo.total_steps = 800'000;
  c.nonmyopic_ppo.ent_coef = 0.0;

  c.adaptivity_dims.encoder = {32, 64};
  c.adaptivity_dims.trunk = {64, 64};
  c.adaptivity_dims.head = {64};
  c.adaptivity_ppo.learning_rate = 3e-4;
  c.adaptivity_ppo.total_steps = 300'000;
  c.adaptivity_ppo.ent_coef = 0.0;
  c.adaptivity_ppo.sup_loss = PathwiseLoss::L2;
  c.adaptivity_ppo.ema_alpha = 0.0;
  c.adaptivity_ppo.segment_length = c.logistic.trials;
  return c;
}

DemoConfig paper_demo_config() {
  DemoConfig c = desk_demo_config();
  c.nonmyopic_dims = SetPolicyDims{};
  c.adaptivity_dims = SetPolicyDims{};
  c.nonmyopic_ppo.total_steps = 3'000'000;
  c.adaptivity_ppo.total_steps = 3'000'000;
  return c;
}

nlohmann::json to_json(const DemoConfig& c) {
  return {{"gp", to_json(c.gp)},
          {"logistic", to_json(c.logistic)},
          {"nonmyopic_network", widths_to_json(c.nonmyopic_dims)},
          {"adaptivity_network", widths_to_json(c.adaptivity_dims)},
          {"nonmyopic_ppo", to_json(c.nonmyopic_ppo)},
          {"adaptivity_ppo", to_json(c.adaptivity_ppo)},
          {"nonmyopic_episodes", c.nonmyopic_episodes},
          {"adaptivity_episodes", c.adaptivity_episodes},
          {"seed", c.seed},
          {"workers", c.workers}};
}

DemoConfig demo_config_from_json(const nlohmann::json& j, const DemoConfig& base) {
  DemoConfig c = base;
  for (const auto& [k, v] : j.items()) {
    if (k == "gp") c.gp = gp_config_from_json(v, c.gp);
    else if (k == "logistic") c.logistic = logistic_config_from_json(v, c.logistic);
    else if (k == "nonmyopic_network") c.nonmyopic_dims = widths_from_json(v, c.nonmyopic_dims);
    else if (k == "adaptivity_network") c.adaptivity_dims = widths_from_json(v, c.adaptivity_dims);
    else if (k == "nonmyopic_ppo") c.nonmyopic_ppo = ppo_config_from_json(v, c.nonmyopic_ppo);
    else if (k == "adaptivity_ppo") c.adaptivity_ppo = ppo_config_from_json(v, c.adaptivity_ppo);
    else if (k == "nonmyopic_episodes") c.nonmyopic_episodes = v.get<std::size_t>();
    else if (k == "adaptivity_episodes") c.adaptivity_episodes = v.get<std::size_t>();
    else if (k == "seed") c.seed = v.get<std::uint64_t>();
    else if (k == "workers") c.workers = v.get<int>();
    else throw std::invalid_argument("demo: unknown key '" + k + "'");
  }
  if (c.nonmyopic_episodes == 0 || c.adaptivity_episodes == 0) {
    throw std::invalid_argument("demo: evaluation episode counts must be positive");
  }
  if (c.workers < 1) throw std::invalid_argument("demo.workers: must be >= 1");
  return c;
}

NonmyopicReport evaluate_nonmyopic(const SetPolicy& analyst, const GpTask& task, std::size_t episodes,
                                   std::uint64_t seed) {
  const GpConfig& g = task.config();
  NonmyopicReport rep;
  rep.myopic_designs = myopic_designs(g);
  rep.optimal_imse = g.probes == 2 ? optimal_pair_imse(g) : std::nan("");
  const double myopic_imse = imse(gp_posterior_variance(g, rep.myopic_designs));
  AnalystEnvConfig env;
  env.experiments = g.probes;

  rep.episodes.resize(episodes);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::size_t i = 0; i < episodes; ++i) {
    Rng latent_rng(derive_seed(seed, i));
    const Vector f = task.sample_latent(latent_rng);
    Rng arng(derive_seed(seed, 1'000'000 + i));
    const AnalystRollout ro = rollout_analyst_at(analyst, task, env, f, arng);
    NonmyopicEpisode& e = rep.episodes[i];
    e.analyst_designs = xs_of(ro.episode);
    e.analyst_l2 = task.l2(f, gp_posterior(g, e.analyst_designs, ys_of(ro.episode)).mean);
    e.analyst_imse = imse(gp_posterior_variance(g, e.analyst_designs));

    Rng mrng(derive_seed(seed, 2'000'000 + i));
    std::vector<double> ys;
    for (double x : rep.myopic_designs) {
      Vector d{{x}};
      ys.push_back(task.run(f, d, mrng).flat[1]);
    }
    e.myopic_l2 = task.l2(f, gp_posterior(g, rep.myopic_designs, ys).mean);
    e.myopic_imse = myopic_imse;
  }
  std::vector<double> al2, aim, ml2, mim;
  for (const auto& e : rep.episodes) {
    al2.push_back(e.analyst_l2);
    aim.push_back(e.analyst_imse);
    ml2.push_back(e.myopic_l2);
    mim.push_back(e.myopic_imse);
  }
  rep.analyst_l2 = mean_stderr(al2);
  rep.analyst_imse = mean_stderr(aim);
  rep.myopic_l2 = mean_stderr(ml2);
  rep.myopic_imse = mean_stderr(mim);
  return rep;
}

AdaptivityReport evaluate_adaptivity(const SetPolicy& adaptive, const SetPolicy& non_adaptive,
                                     const SetPolicy& random, const LogisticTask& task, std::size_t episodes,
                                     std::uint64_t seed) {
  const LogisticConfig& lc = task.config();
  const SetPolicy* arms[3] = {&adaptive, &non_adaptive, &random};
  const AnalystEnvConfig envs[3] = {adaptivity_env(lc, false, false), adaptivity_env(lc, true, false),
                                    adaptivity_env(lc, false, true)};
  AdaptivityReport rep;
  rep.episodes.resize(episodes);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::size_t i = 0; i < episodes; ++i) {
    Rng latent_rng(derive_seed(seed, i));
    const Vector theta = task.sample_latent(latent_rng);
    double est[3];
    for (int a = 0; a < 3; ++a) {
      Rng rng(derive_seed(seed, 1'000'000 * static_cast<std::uint64_t>(a + 1) + i));
      const AnalystRollout ro = rollout_analyst_at(*arms[a], task, envs[a], theta, rng);
      est[a] = task.denormalise(ro.estimates.back())[0];
    }
    rep.episodes[i] = {theta[0], est[0], est[1], est[2]};
  }
  std::vector<double> se[3];
  for (const auto& e : rep.episodes) {
    se[0].push_back((e.adaptive - e.theta) * (e.adaptive - e.theta));
    se[1].push_back((e.non_adaptive - e.theta) * (e.non_adaptive - e.theta));
    se[2].push_back((e.random - e.theta) * (e.random - e.theta));
  }
  rep.adaptive = mean_stderr(se[0]);
  rep.non_adaptive = mean_stderr(se[1]);
  rep.random = mean_stderr(se[2]);
  return rep;
}

void train_demo(DemoKind kind, const DemoConfig& cfg, const std::filesystem::path& dir, std::ostream* log) {
  std::filesystem::create_directories(dir);
  auto train = [&](std::shared_ptr<const ExperimentTask> task, SetPolicyDims dims, const PpoConfig& ppo,
                   const AnalystEnvConfig& env, std::uint64_t seed, const char* file) {
    AnalystTrainingConfig tc;
    tc.dims = dims;
    tc.env = env;
    tc.ppo = ppo;
    tc.seed = seed;
    tc.workers = cfg.workers;
    std::ofstream metrics(dir / (std::filesystem::path(file).stem().string() + "_metrics.tsv"));
    tc.metrics = &metrics;
    if (log != nullptr) *log << "training " << file << " (" << ppo.total_steps << " steps)" << std::endl;
    const TrainedAnalyst t = train_analyst(task, tc);
    save_analyst(t.policy, *task, env, dir / file);
  };
  if (kind == DemoKind::Nonmyopic) {
    auto task = std::make_shared<const GpTask>(cfg.gp);
    AnalystEnvConfig env;
    env.experiments = cfg.gp.probes;
    train(task, cfg.nonmyopic_dims, cfg.nonmyopic_ppo, env, cfg.seed, kNonmyopicFile);
    return;
  }
  auto task = std::make_shared<const LogisticTask>(cfg.logistic);
  train(task, cfg.adaptivity_dims, cfg.adaptivity_ppo, adaptivity_env(cfg.logistic, false, false), cfg.seed,
        kAdaptiveFile);
  train(task, cfg.adaptivity_dims, cfg.adaptivity_ppo, adaptivity_env(cfg.logistic, true, false),
        derive_seed(cfg.seed, 1), kNonAdaptiveFile);
  train(task, cfg.adaptivity_dims, cfg.adaptivity_ppo, adaptivity_env(cfg.logistic, false, true),
        derive_seed(cfg.seed, 2), kRandomFile);
}

nlohmann::json run_demo(DemoKind kind, const DemoConfig& cfg, const std::filesystem::path& dir) {
  const std::uint64_t eval_seed = derive_seed(cfg.seed, 0xE7A1);
  std::ofstream metrics, rows;
  auto open = [&] {
    metrics.open(dir / "metrics.tsv");
    rows.open(dir / "episodes.tsv");
    if (!metrics || !rows) throw std::runtime_error("cannot write demo outputs in " + dir.string());
    metrics << std::setprecision(10);
    rows << std::setprecision(10);
  };
  if (kind == DemoKind::Nonmyopic) {
    const GpTask task(cfg.gp);
    const AnalystCheckpoint ck = load_for(dir / kNonmyopicFile, task);
    const NonmyopicReport r = evaluate_nonmyopic(ck.policy, task, cfg.nonmyopic_episodes, eval_seed);
    open();
    metrics << "method\tl2_mean\tl2_stderr\timse_mean\timse_stderr\tn\n";
    metrics << "analyst\t" << r.analyst_l2.mean << '\t' << r.analyst_l2.stderr_ << '\t' << r.analyst_imse.mean << '\t'
            << r.analyst_imse.stderr_ << '\t' << r.analyst_l2.n << '\n';
    metrics << "myopic\t" << r.myopic_l2.mean << '\t' << r.myopic_l2.stderr_ << '\t' << r.myopic_imse.mean << '\t'
            << r.myopic_imse.stderr_ << '\t' << r.myopic_l2.n << '\n';
    rows << "episode\tanalyst_designs\tanalyst_l2\tanalyst_imse\tmyopic_l2\tmyopic_imse\n";
    for (std::size_t i = 0; i < r.episodes.size(); ++i) {
      const auto& e = r.episodes[i];
      rows << i << '\t';
      for (std::size_t k = 0; k < e.analyst_designs.size(); ++k) rows << (k ? "," : "") << e.analyst_designs[k];
      rows << '\t' << e.analyst_l2 << '\t' << e.analyst_imse << '\t' << e.myopic_l2 << '\t' << e.myopic_imse << '\n';
    }
    return {{"demo", "nonmyopic"},
            {"analyst", {{"l2", to_json(r.analyst_l2)}, {"imse", to_json(r.analyst_imse)}}},
            {"myopic", {{"l2", to_json(r.myopic_l2)}, {"imse", to_json(r.myopic_imse)}, {"designs", r.myopic_designs}}},
            {"optimal_pair_imse", r.optimal_imse}};
  }
  const LogisticTask task(cfg.logistic);
  const AnalystCheckpoint a = load_for(dir / kAdaptiveFile, task);
  const AnalystCheckpoint n = load_for(dir / kNonAdaptiveFile, task);
  const AnalystCheckpoint r = load_for(dir / kRandomFile, task);
  const AdaptivityReport rep = evaluate_adaptivity(a.policy, n.policy, r.policy, task, cfg.adaptivity_episodes,
                                                   eval_seed);
  open();
  metrics << "method\tmse_mean\tmse_stderr\tn\n";
  metrics << "adaptive\t" << rep.adaptive.mean << '\t' << rep.adaptive.stderr_ << '\t' << rep.adaptive.n << '\n';
  metrics << "non_adaptive\t" << rep.non_adaptive.mean << '\t' << rep.non_adaptive.stderr_ << '\t'
          << rep.non_adaptive.n << '\n';
  metrics << "random\t" << rep.random.mean << '\t' << rep.random.stderr_ << '\t' << rep.random.n << '\n';
  rows << "episode\ttheta\tadaptive\tnon_adaptive\trandom\n";
  for (std::size_t i = 0; i < rep.episodes.size(); ++i) {
    const auto& e = rep.episodes[i];
    rows << i << '\t' << e.theta << '\t' << e.adaptive << '\t' << e.non_adaptive << '\t' << e.random << '\n';
  }
  return {{"demo", "adaptivity"},
          {"adaptive", to_json(rep.adaptive)},
          {"non_adaptive", to_json(rep.non_adaptive)},
          {"random", to_json(rep.random)}};
}

}  // namespace aed
