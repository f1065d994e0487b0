#include "aed/eval/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace aed {

RegressionFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("linear_fit: x and y differ in length");
  if (x.size() < 2) throw std::invalid_argument("linear_fit: need at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("linear_fit: x is constant");
  RegressionFit f;
  f.n = x.size();
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (f.slope * x[i] + f.intercept);
    ss_res += e * e;
  }
  f.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return f;
}

nlohmann::json to_json(const RegressionFit& f) {
  return {{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}, {"n", f.n}};
}

std::string to_string(DesignCondition c) { return c == DesignCondition::Optimised ? "optimised" : "random"; }

AnalystFn policy_analyst(const SetPolicy& policy, const ExperimentTask& task) {
  return [&policy, &task](const AnalystEpisode& ep) {
    Rng unused(0);
    return analyst_act(policy, task, ep.observation(), SampleMode::Deterministic, unused).action;
  };
}

AnalystEvaluation evaluate_analyst(const AnalystFn& analyst, const ExperimentTask& task, std::size_t experiments,
                                   std::size_t n_eval, DesignCondition condition, std::uint64_t seed) {
  const std::size_t k = task.estimate_dim();
  std::vector<std::vector<double>> err(n_eval, std::vector<double>(experiments + 1));
  std::vector<Vector> truth(n_eval), final_est(n_eval);
  std::vector<std::vector<Vector>> designs(n_eval);

#pragma omp parallel for schedule(dynamic, 4)
  for (std::size_t i = 0; i < n_eval; ++i) {
    Rng rng(derive_seed(seed, i));
    AnalystEpisode ep;
    ep.latent = task.sample_latent(rng);
    ep.experiments = experiments;
    truth[i] = task.normalised_truth(ep.latent);
    for (std::size_t t = 0;; ++t) {
      const AnalystAction a = analyst(ep);
      err[i][t] = -discrepancy(std::span<const double>(truth[i].data(), k),
                               std::span<const double>(a.estimate.data(), static_cast<std::size_t>(a.estimate.size())));
      if (t == experiments) {
        final_est[i] = a.estimate;
        break;
      }
      const Vector d = condition == DesignCondition::Random ? sample_design(task, rng) : a.design;
      run_experiment(task, ep, d, rng);
      designs[i].push_back(ep.log.back().design);
    }
  }

  AnalystEvaluation ev;
  ev.curve.condition = condition;
  std::vector<double> col(n_eval);
  for (std::size_t t = 0; t <= experiments; ++t) {
    for (std::size_t i = 0; i < n_eval; ++i) col[i] = err[i][t];
    ev.curve.points.push_back(mean_stderr(col));
  }
  ev.truths.assign(k, {});
  ev.estimates.assign(k, {});
  for (std::size_t i = 0; i < n_eval; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      ev.truths[j].push_back(truth[i][static_cast<Eigen::Index>(j)]);
      ev.estimates[j].push_back(final_est[i][static_cast<Eigen::Index>(j)]);
    }
    for (auto& d : designs[i]) ev.designs.push_back(std::move(d));
  }
  return ev;
}

ErrorCurve error_curve(const SetPolicy& policy, const ExperimentTask& task, std::size_t experiments,
                       std::size_t n_eval, DesignCondition condition, std::uint64_t seed) {
  return evaluate_analyst(policy_analyst(policy, task), task, experiments, n_eval, condition, seed).curve;
}

std::vector<RegressionFit> parameter_fits(const AnalystEvaluation& ev) {
  std::vector<RegressionFit> fits;
  for (std::size_t j = 0; j < ev.truths.size(); ++j) fits.push_back(linear_fit(ev.truths[j], ev.estimates[j]));
  return fits;
}

std::size_t Histogram::total() const {
  std::size_t s = 0;
  for (auto c : counts) s += c;
  return s;
}

std::vector<Histogram> design_histogram(std::span<const Vector> designs, const ExperimentTask& task,
                                        std::size_t bins) {
  if (bins == 0) throw std::invalid_argument("design_histogram: bins must be positive");
  if (designs.empty()) throw std::invalid_argument("design_histogram: no designs");
  std::vector<Histogram> hs;
  for (std::size_t dim = 0; dim < task.design_dim(); ++dim) {
    const Range r = task.design_range(dim);
    Histogram h{r.lo, r.hi, std::vector<std::size_t>(bins, 0)};
    for (const Vector& d : designs) {
      const double u = r.width() > 0 ? (d[static_cast<Eigen::Index>(dim)] - r.lo) / r.width() : 0.0;
      const auto b = static_cast<std::size_t>(std::clamp(std::floor(u * static_cast<double>(bins)), 0.0,
                                                         static_cast<double>(bins - 1)));
      ++h.counts[b];
    }
    hs.push_back(std::move(h));
  }
  return hs;
}

std::vector<BehaviourPoint> behaviour_curve(const UserModel& model, ParamId param, std::span<const double> grid,
                                            std::size_t n_episodes, std::uint64_t seed) {
  const IntentFn controller = model.controller();
  std::vector<BehaviourPoint> out;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::vector<double> steps(n_episodes), errors(n_episodes), time(n_episodes);
#pragma omp parallel for schedule(dynamic, 16)
    for (std::size_t i = 0; i < n_episodes; ++i) {
      Rng rng(derive_seed(seed, g * 10'000'000 + i));
      UserParams p = sample_user_params(model.prior, rng, model.config.study);
      p[param] = grid[g];
      const Design d = model.config.design_space.sample(rng);
      const EpisodeTrace t = run_episode(controller, model.config, d, p, rng);
      steps[i] = t.steps;
      errors[i] = t.success ? 0.0 : 1.0;
      time[i] = t.total_time;
    }
    out.push_back({grid[g], mean_stderr(steps), mean_stderr(errors), mean_stderr(time)});
  }
  return out;
}

nlohmann::json plot_description(const std::string& title, const std::string& x_label, const std::string& y_label,
                                const std::vector<PlotSeries>& series) {
  nlohmann::json s = nlohmann::json::array();
  for (const auto& p : series) {
    nlohmann::json e = {{"name", p.name}, {"x", p.x}, {"y", p.y}};
    if (!p.band.empty()) e["band"] = p.band;
    s.push_back(std::move(e));
  }
  return {{"title", title}, {"x_axis", {{"label", x_label}}}, {"y_axis", {{"label", y_label}}}, {"series", s}};
}

PlotSeries curve_series(const ErrorCurve& c) {
  PlotSeries s{to_string(c.condition), {}, {}, {}};
  for (std::size_t t = 0; t < c.points.size(); ++t) {
    s.x.push_back(static_cast<double>(t));
    s.y.push_back(c.points[t].mean);
    s.band.push_back(c.points[t].stderr_);
  }
  return s;
}

PlotSeries behaviour_series(const std::string& name, const std::vector<BehaviourPoint>& pts, bool error_rate) {
  PlotSeries s{name, {}, {}, {}};
  for (const auto& p : pts) {
    const MeanStderr& m = error_rate ? p.error_rate : p.steps;
    s.x.push_back(p.value);
    s.y.push_back(m.mean);
    s.band.push_back(m.stderr_);
  }
  return s;
}

void write_table(const std::filesystem::path& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t i = 0; i < header.size(); ++i) f << (i ? "\t" : "") << header[i];
  f << '\n';
  for (const auto& r : rows) {
    if (r.size() != header.size()) throw std::invalid_argument("write_table: row width differs from header");
    for (std::size_t i = 0; i < r.size(); ++i) f << (i ? "\t" : "") << r[i];
    f << '\n';
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace aed
