#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <Eigen/QR>

#include "aed/demos/logistic.hpp"
#include "aed/eval/evaluation.hpp"

using namespace aed;

namespace {

std::shared_ptr<const UserModel> tiny_user(Study s) {
  EnsembleTrainingConfig cfg;
  cfg.pointing.study = s;
  cfg.prior = default_prior(s);
  cfg.dims = default_controller_dims(s);
  cfg.dims.trunk = {8};
  cfg.dims.head = {8};
  cfg.ppo.n_envs = 1;
  cfg.ppo.n_steps = 16;
  cfg.ppo.total_steps = 16;
  cfg.ppo.epochs = 1;
  return std::make_shared<const UserModel>(train_ensemble(cfg));
}

}  // namespace

TEST_CASE("linear_fit: exact lines") {
  const std::vector<double> x{0.0, 1.0, 2.0, 3.5};
  auto f = linear_fit(x, x);
  CHECK(f.slope == doctest::Approx(1.0));
  CHECK(f.intercept == doctest::Approx(0.0).scale(1.0));
  CHECK(f.r2 == doctest::Approx(1.0));
  std::vector<double> y;
  for (double v : x) y.push_back(2 * v + 1);
  f = linear_fit(x, y);
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.r2 == doctest::Approx(1.0));
  CHECK(f.n == 4);
}

TEST_CASE("linear_fit: matches a least-squares solve on random data") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 5 + trial * 3;
    std::vector<double> x(n), y(n);
    Matrix a(n, 2);
    Vector b(n);
    for (int i = 0; i < n; ++i) {
      x[i] = standard_normal(rng);
      y[i] = 0.3 * x[i] + standard_normal(rng);
      a(i, 0) = 1.0;
      a(i, 1) = x[i];
      b[i] = y[i];
    }
    const Vector coef = a.colPivHouseholderQr().solve(b);
    const Vector resid = b - a * coef;
    const double ybar = b.mean();
    const double r2 = 1.0 - resid.squaredNorm() / (b.array() - ybar).square().sum();
    const RegressionFit f = linear_fit(x, y);
    CHECK(std::abs(f.intercept - coef[0]) < 1e-10);
    CHECK(std::abs(f.slope - coef[1]) < 1e-10);
    CHECK(std::abs(f.r2 - r2) < 1e-10);
    CHECK(f.r2 <= 1.0);
  }
}

TEST_CASE("linear_fit: rejections") {
  const std::vector<double> c{1.0, 1.0, 1.0}, y{1.0, 2.0, 3.0}, one{1.0};
  CHECK_THROWS_AS(linear_fit(c, y), std::invalid_argument);
  CHECK_THROWS_AS(linear_fit(one, one), std::invalid_argument);
  CHECK_THROWS_AS(linear_fit(y, one), std::invalid_argument);
}

TEST_CASE("error curves: prior entry, oracle is flat zero, M = 0") {
  const LogisticTask task(LogisticConfig{});
  const AnalystFn oracle = [&](const AnalystEpisode& ep) {
    return AnalystAction{Vector{{0.0}}, task.target(ep.latent)};
  };
  const auto ev = evaluate_analyst(oracle, task, 5, 200, DesignCondition::Optimised, 3);
  REQUIRE(ev.curve.points.size() == 6);
  for (const auto& p : ev.curve.points) {
    CHECK(p.mean == 0.0);
    CHECK(p.stderr_ == 0.0);
  }
  CHECK(ev.designs.size() == 1000);

  // constant estimate 0.5 against U(0, 1) truths: mean |u - 1/2| = 1/4
  const AnalystFn prior_only = [](const AnalystEpisode&) { return AnalystAction{Vector{{0.0}}, Vector{{0.5}}}; };
  const auto zero = evaluate_analyst(prior_only, task, 0, 4000, DesignCondition::Optimised, 9);
  REQUIRE(zero.curve.points.size() == 1);
  CHECK(std::abs(zero.curve.points[0].mean - 0.25) < 4 * zero.curve.points[0].stderr_);
  CHECK(zero.designs.empty());

  Rng rng(1);
  SetPolicyDims d = default_analyst_dims(task, Architecture::Pooled, 3);
  d.encoder = {8};
  d.trunk = {8};
  d.head = {8};
  const SetPolicy p(d, rng);
  const Vector e0 = analyst_estimate(p, AnalystObservation{});
  const ErrorCurve opt = error_curve(p, task, 3, 300, DesignCondition::Optimised, 5);
  const ErrorCurve rnd = error_curve(p, task, 3, 300, DesignCondition::Random, 5);
  // count 0 is the empty-memory estimate in both conditions, on the same latents
  CHECK(opt.points[0].mean == rnd.points[0].mean);
  const auto ev2 = evaluate_analyst(policy_analyst(p, task), task, 3, 300, DesignCondition::Optimised, 5);
  double prior_err = 0.0;
  for (double t : ev2.truths[0]) prior_err += std::abs(t - e0[0]);
  CHECK(opt.points[0].mean == doctest::Approx(prior_err / 300.0).epsilon(1e-12));
  // deterministic under a fixed seed
  CHECK(error_curve(p, task, 3, 300, DesignCondition::Random, 5).points[3].mean == rnd.points[3].mean);
  const auto fits = parameter_fits(ev2);
  CHECK(fits.size() == 1);
}

TEST_CASE("design_histogram: conservation, single design, upper edge") {
  const LogisticTask task(LogisticConfig{});
  const std::vector<Vector> one{Vector{{3.0}}};
  const auto h1 = design_histogram(one, task, 10);
  REQUIRE(h1.size() == 1);
  CHECK(h1[0].total() == 1);
  CHECK(h1[0].counts[6] == 1);
  const std::vector<Vector> edge{Vector{{10.0}}, Vector{{-10.0}}};
  const auto he = design_histogram(edge, task, 4);
  CHECK(he[0].counts.front() == 1);
  CHECK(he[0].counts.back() == 1);
  Rng rng(2);
  std::vector<Vector> many;
  for (int i = 0; i < 777; ++i) many.push_back(sample_design(task, rng));
  CHECK(design_histogram(many, task, 13)[0].total() == 777);
  CHECK_THROWS_AS(design_histogram(std::vector<Vector>{}, task, 3), std::invalid_argument);
}

TEST_CASE("behaviour_curve: Bernoulli stderr bound, determinism") {
  auto user = tiny_user(Study::Three);
  const std::vector<double> grid{0.0, 1.0};
  const std::size_t n = 60;
  const auto a = behaviour_curve(*user, ParamId::ThetaPref, grid, n, 4);
  const auto b = behaviour_curve(*user, ParamId::ThetaPref, grid, n, 4);
  REQUIRE(a.size() == 2);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].value == grid[i]);
    CHECK(a[i].error_rate.stderr_ <= 0.5 / std::sqrt(static_cast<double>(n)) + 1e-15);
    CHECK(a[i].error_rate.mean >= 0.0);
    CHECK(a[i].error_rate.mean <= 1.0);
    CHECK(a[i].steps.mean == b[i].steps.mean);
  }
}

TEST_CASE("plot description and tables") {
  ErrorCurve c;
  c.points = {MeanStderr{0.5, 0.01, 10}, MeanStderr{0.3, 0.02, 10}};
  const auto j = plot_description("error", "experiments", "L1", {curve_series(c)});
  CHECK(j["series"][0]["name"] == "optimised");
  CHECK(j["series"][0]["x"] == nlohmann::json({0.0, 1.0}));
  CHECK(j["series"][0]["band"][1] == 0.02);
  CHECK(j["x_axis"]["label"] == "experiments");

  const auto path = std::filesystem::temp_directory_path() / "aed_test_eval_table.tsv";
  write_table(path, {"a", "b"}, {{"1", fmt(0.25)}, {"2", fmt(1e-12)}});
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  CHECK(ss.str() == "a\tb\n1\t0.25\n2\t1e-12\n");
  CHECK_THROWS_AS(write_table(path, {"a"}, {{"1", "2"}}), std::invalid_argument);
  std::filesystem::remove(path);
}
