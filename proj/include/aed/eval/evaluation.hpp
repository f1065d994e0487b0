#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "aed/analyst/analyst_env.hpp"
#include "aed/eval/stats.hpp"
#include "aed/user/user_model.hpp"

namespace aed {

struct RegressionFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t n = 0;
};

/// Ordinary least squares of y on x. Throws on n < 2, length mismatch or
/// constant x. R² = 1 − SS_res / SS_tot (1 when y is constant and fitted).
RegressionFit linear_fit(std::span<const double> x, std::span<const double> y);
nlohmann::json to_json(const RegressionFit& f);

enum class DesignCondition { Optimised, Random };
std::string to_string(DesignCondition c);

/// Mean ± stderr of the normalised L1 error after 0..M experiments.
struct ErrorCurve {
  DesignCondition condition = DesignCondition::Optimised;
  std::vector<MeanStderr> points;
};

/// Anything that maps an episode's state to the next action. Policies only
/// look at `ep.observation()`; test oracles may read the latent.
using AnalystFn = std::function<AnalystAction(const AnalystEpisode& ep)>;
AnalystFn policy_analyst(const SetPolicy& policy, const ExperimentTask& task);

struct AnalystEvaluation {
  ErrorCurve curve;
  std::vector<std::vector<double>> truths;     // per estimated parameter, normalised
  std::vector<std::vector<double>> estimates;  // final estimates, normalised
  std::vector<Vector> designs;                 // every design run
};

/// Runs n_eval episodes (M = env.experiments, which may be 0). The random
/// condition swaps the analyst's designs for uniform draws and keeps its
/// estimates. Episodes are seeded per index, so results do not depend on
/// the thread count.
AnalystEvaluation evaluate_analyst(const AnalystFn& analyst, const ExperimentTask& task, std::size_t experiments,
                                   std::size_t n_eval, DesignCondition condition, std::uint64_t seed);
ErrorCurve error_curve(const SetPolicy& policy, const ExperimentTask& task, std::size_t experiments,
                       std::size_t n_eval, DesignCondition condition, std::uint64_t seed);
/// One fit per estimated parameter: final estimate against truth.
std::vector<RegressionFit> parameter_fits(const AnalystEvaluation& ev);

struct Histogram {
  double lo = 0.0, hi = 0.0;
  std::vector<std::size_t> counts;
  std::size_t total() const;
};

/// Per design dimension, `bins` equal bins over the task's design range;
/// the upper edge falls in the last bin.
std::vector<Histogram> design_histogram(std::span<const Vector> designs, const ExperimentTask& task,
                                        std::size_t bins);

struct BehaviourPoint {
  double value = 0.0;
  MeanStderr steps;
  MeanStderr error_rate;  // keypress outside the target or max steps reached
  MeanStderr time;
};

/// Sweeps one parameter over `grid`; the others come from the prior and
/// designs are uniform over the design space.
std::vector<BehaviourPoint> behaviour_curve(const UserModel& model, ParamId param, std::span<const double> grid,
                                            std::size_t n_episodes, std::uint64_t seed);

/// Plot description: series with x, y and an optional ±band.
struct PlotSeries {
  std::string name;
  std::vector<double> x, y, band;
};
nlohmann::json plot_description(const std::string& title, const std::string& x_label, const std::string& y_label,
                                const std::vector<PlotSeries>& series);

PlotSeries curve_series(const ErrorCurve& c);
PlotSeries behaviour_series(const std::string& name, const std::vector<BehaviourPoint>& pts, bool error_rate);

/// Tab-separated table with a header row.
void write_table(const std::filesystem::path& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows);
std::string fmt(double v);

}  // namespace aed
