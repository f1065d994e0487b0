#include "aed/config/pipeline.hpp"

#include <fstream>

#include "aed/numerics/checkpoint.hpp"

namespace aed {
namespace {

std::shared_ptr<const PointingTask> load_task(const RunConfig& cfg, const std::filesystem::path& dir) {
  auto user = std::make_shared<const UserModel>(load_user_model(dir / "user.ckpt"));
  if (user->config.study != cfg.study) {
    throw CheckpointError((dir / "user.ckpt").string() + ": trained for study " +
                          std::to_string(to_int(user->config.study)) + ", config says " +
                          std::to_string(to_int(cfg.study)));
  }
  return std::make_shared<const PointingTask>(user, cfg.analyst.task);
}

std::string metrics_name(AnalystVariant v) {
  switch (v) {
    case AnalystVariant::Optimised: return "analyst_metrics.tsv";
    case AnalystVariant::RandomDesigns: return "analyst_random_metrics.tsv";
    case AnalystVariant::MaskedOutcomes: return "analyst_masked_metrics.tsv";
  }
  return "analyst_metrics.tsv";
}

}  // namespace

AnalystVariant variant_of(const AnalystEnvConfig& env) {
  if (env.random_designs && env.mask_outcomes) {
    throw std::invalid_argument("analyst.env: random_designs and mask_outcomes are separate baselines");
  }
  if (env.random_designs) return AnalystVariant::RandomDesigns;
  if (env.mask_outcomes) return AnalystVariant::MaskedOutcomes;
  return AnalystVariant::Optimised;
}

std::string checkpoint_name(AnalystVariant v) {
  switch (v) {
    case AnalystVariant::Optimised: return "analyst.ckpt";
    case AnalystVariant::RandomDesigns: return "analyst_random.ckpt";
    case AnalystVariant::MaskedOutcomes: return "analyst_masked.ckpt";
  }
  return "analyst.ckpt";
}

std::filesystem::path study_dir(const RunConfig& cfg) {
  return std::filesystem::path(cfg.out_dir) / ("study" + std::to_string(to_int(cfg.study)));
}

void archive_config(const RunConfig& cfg, const std::filesystem::path& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  std::ofstream f(dir / name);
  if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
  f << to_json(cfg).dump(2) << '\n';
}

UserModel pipeline_train_user(const RunConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  archive_config(cfg, dir, "user_config.json");
  std::ofstream log(dir / "user_metrics.tsv");
  EnsembleTrainingConfig t = user_training_config(cfg);
  t.metrics = &log;
  UserModel m = train_ensemble(t);
  save_user_model(m, dir / "user.ckpt");
  return m;
}

TrainedAnalyst pipeline_train_analyst(const RunConfig& cfg, const std::filesystem::path& dir) {
  const AnalystVariant v = variant_of(cfg.analyst.env);
  const auto task = load_task(cfg, dir);
  const std::string stem = checkpoint_name(v).substr(0, checkpoint_name(v).size() - 5);
  archive_config(cfg, dir, stem + "_config.json");
  std::ofstream log(dir / metrics_name(v));
  AnalystTrainingConfig a = analyst_training_config(cfg, *task);
  a.metrics = &log;
  TrainedAnalyst tr = train_analyst(task, a);
  save_analyst(tr.policy, *task, cfg.analyst.env, dir / checkpoint_name(v));
  return tr;
}

nlohmann::json pipeline_evaluate(const RunConfig& cfg, const std::filesystem::path& dir) {
  const auto task = load_task(cfg, dir);
  const AnalystCheckpoint opt = load_analyst(dir / checkpoint_name(AnalystVariant::Optimised));
  check_compatible(opt, *task);
  const std::size_t m = opt.env.experiments;
  const std::uint64_t seed = cfg.eval.seed;

  const AnalystEvaluation ev =
      evaluate_analyst(policy_analyst(opt.policy, *task), *task, m, cfg.eval.episodes, DesignCondition::Optimised, seed);
  std::optional<AnalystCheckpoint> rnd;
  if (std::filesystem::exists(dir / checkpoint_name(AnalystVariant::RandomDesigns))) {
    rnd = load_analyst(dir / checkpoint_name(AnalystVariant::RandomDesigns));
    check_compatible(*rnd, *task);
  }
  const SetPolicy& rnd_policy = rnd ? rnd->policy : opt.policy;
  const AnalystEvaluation ev_rnd =
      evaluate_analyst(policy_analyst(rnd_policy, *task), *task, m, cfg.eval.episodes, DesignCondition::Random, seed);

  const std::vector<RegressionFit> fits = parameter_fits(ev);
  const auto hist = design_histogram(ev.designs, *task, cfg.eval.histogram_bins);
  const auto behaviour = behaviour_curve(task->user(), cfg.eval.behaviour_param, cfg.eval.behaviour_grid,
                                         cfg.eval.behaviour_episodes, derive_seed(seed, 0xBE4A));

  std::vector<std::string> names;
  for (auto id : task->estimated()) names.emplace_back(param_name(id));

  std::vector<std::vector<std::string>> rows;
  for (std::size_t j = 0; j < fits.size(); ++j) {
    rows.push_back({names[j], fmt(fits[j].slope), fmt(fits[j].intercept), fmt(fits[j].r2), std::to_string(fits[j].n)});
  }
  write_table(dir / "fits.tsv", {"parameter", "slope", "intercept", "r2", "n"}, rows);

  rows.clear();
  for (const ErrorCurve* c : {&ev.curve, &ev_rnd.curve}) {
    for (std::size_t t = 0; t < c->points.size(); ++t) {
      rows.push_back({to_string(c->condition), std::to_string(t), fmt(c->points[t].mean), fmt(c->points[t].stderr_),
                      std::to_string(c->points[t].n)});
    }
  }
  write_table(dir / "curves.tsv", {"condition", "experiments", "l1_mean", "l1_stderr", "n"}, rows);

  rows.clear();
  const char* dim_names[] = {"distance", "width"};
  for (std::size_t d = 0; d < hist.size(); ++d) {
    const Histogram& h = hist[d];
    const double w = (h.hi - h.lo) / static_cast<double>(h.counts.size());
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
      rows.push_back({dim_names[d], fmt(h.lo + w * static_cast<double>(b)), fmt(h.lo + w * static_cast<double>(b + 1)),
                      std::to_string(h.counts[b])});
    }
  }
  write_table(dir / "histograms.tsv", {"design", "bin_lo", "bin_hi", "count"}, rows);

  rows.clear();
  for (const auto& p : behaviour) {
    rows.push_back({fmt(p.value), fmt(p.steps.mean), fmt(p.steps.stderr_), fmt(p.error_rate.mean),
                    fmt(p.error_rate.stderr_), fmt(p.time.mean), fmt(p.time.stderr_), std::to_string(p.steps.n)});
  }
  write_table(dir / "behaviour.tsv",
              {std::string(param_name(cfg.eval.behaviour_param)), "steps_mean", "steps_stderr", "error_rate_mean",
               "error_rate_stderr", "time_mean", "time_stderr", "n"},
              rows);

  rows.clear();
  std::vector<std::string> header{"episode"};
  for (const auto& n : names) {
    header.push_back(n + "_truth");
    header.push_back(n + "_estimate");
  }
  for (std::size_t i = 0; i < cfg.eval.episodes; ++i) {
    std::vector<std::string> r{std::to_string(i)};
    for (std::size_t j = 0; j < names.size(); ++j) {
      r.push_back(fmt(ev.truths[j][i]));
      r.push_back(fmt(ev.estimates[j][i]));
    }
    rows.push_back(std::move(r));
  }
  write_table(dir / "estimates.tsv", header, rows);

  nlohmann::json plots = nlohmann::json::array();
  plots.push_back(plot_description("error vs experiments", "experiments", "L1 error (normalised)",
                                   {curve_series(ev.curve), curve_series(ev_rnd.curve)}));
  const std::string pname(param_name(cfg.eval.behaviour_param));
  plots.push_back(plot_description("behaviour", pname, "steps", {behaviour_series("steps", behaviour, false)}));
  plots.push_back(plot_description("behaviour", pname, "error rate", {behaviour_series("error rate", behaviour, true)}));
  for (std::size_t j = 0; j < names.size(); ++j) {
    plots.push_back(plot_description(names[j], "truth", "estimate", {PlotSeries{"estimates", ev.truths[j], ev.estimates[j], {}}}));
  }
  std::ofstream(dir / "plots.json") << plots.dump(2) << '\n';

  nlohmann::json summary;
  summary["study"] = to_int(cfg.study);
  summary["experiments"] = m;
  summary["episodes"] = cfg.eval.episodes;
  summary["random_curve_source"] = rnd ? "analyst_random.ckpt" : "analyst.ckpt with uniform designs";
  summary["fits"] = nlohmann::json::object();
  for (std::size_t j = 0; j < fits.size(); ++j) summary["fits"][names[j]] = to_json(fits[j]);
  summary["curves"] = {{"optimised", nlohmann::json::array()}, {"random", nlohmann::json::array()}};
  for (const auto& p : ev.curve.points) summary["curves"]["optimised"].push_back(to_json(p));
  for (const auto& p : ev_rnd.curve.points) summary["curves"]["random"].push_back(to_json(p));
  summary["behaviour"] = nlohmann::json::array();
  for (const auto& p : behaviour) {
    summary["behaviour"].push_back(
        {{"value", p.value}, {"steps", to_json(p.steps)}, {"error_rate", to_json(p.error_rate)}, {"time", to_json(p.time)}});
  }
  summary["histograms"] = nlohmann::json::array();
  for (const auto& h : hist) summary["histograms"].push_back({{"lo", h.lo}, {"hi", h.hi}, {"counts", h.counts}});
  std::ofstream(dir / "summary.json") << summary.dump(2) << '\n';
  archive_config(cfg, dir, "eval_config.json");
  return summary;
}

}  // namespace aed
