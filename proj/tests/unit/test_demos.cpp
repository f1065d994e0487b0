#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "aed/demos/demo.hpp"

using namespace aed;

namespace {

// Closed-form posterior variance for up to two observations.
double var_oracle(const GpConfig& c, double x, const std::vector<double>& xs) {
  auto k = [&](double a, double b) { return c.variance * std::exp(-0.5 * std::pow((a - b) / c.lengthscale, 2)); };
  if (xs.empty()) return c.variance;
  if (xs.size() == 1) return c.variance - k(x, xs[0]) * k(x, xs[0]) / (c.variance + c.noise);
  const double a = c.variance + c.noise, b = k(xs[0], xs[1]), det = a * a - b * b;
  const double k0 = k(x, xs[0]), k1 = k(x, xs[1]);
  return c.variance - (a * k0 * k0 - 2 * b * k0 * k1 + a * k1 * k1) / det;
}

double imse_oracle(const GpConfig& c, const std::vector<double>& xs) {
  const auto g = gp_grid(c);
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < g.size(); ++i) {
    s += 0.5 * (g[i + 1] - g[i]) * (var_oracle(c, g[i], xs) + var_oracle(c, g[i + 1], xs));
  }
  return s;
}

SetPolicyDims small_dims(const ExperimentTask& task, std::size_t m) {
  SetPolicyDims d = default_analyst_dims(task, Architecture::Pooled, m);
  d.encoder = {8};
  d.trunk = {8};
  d.head = {8};
  return d;
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("aed_test_demos_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("gp_sample: zero variance, determinism, Monte-Carlo covariance") {
  GpConfig c;
  c.variance = 0.0;
  Rng r0(1);
  CHECK(gp_sample(c, r0).isZero(0.0));

  c = GpConfig{};
  Rng a(42), b(42);
  CHECK(gp_sample(c, a) == gp_sample(c, b));

  // grid points 16 and 24 are x = 0.25 and 0.375
  const int n = 10000;
  Rng rng(7);
  double s0 = 0, s1 = 0, s01 = 0, s00 = 0;
  for (int i = 0; i < n; ++i) {
    const Vector f = gp_sample(c, rng);
    s0 += f[16];
    s1 += f[24];
    s01 += f[16] * f[24];
    s00 += f[16] * f[16];
  }
  const double cov = s01 / n - (s0 / n) * (s1 / n);
  const double var = s00 / n - (s0 / n) * (s0 / n);
  const double k = std::exp(-0.5 * 0.5 * 0.5);
  CHECK(std::abs(cov - k) <= 0.05 * k);
  CHECK(std::abs(var - 1.0) <= 0.05);
}

TEST_CASE("gp_sample: near-singular kernel still factorises with jitter") {
  GpConfig c;
  c.lengthscale = 1e4;  // kernel matrix is numerically rank one
  Rng rng(3);
  const Vector f = gp_sample(c, rng);
  REQUIRE(f.allFinite());
  CHECK(f.maxCoeff() - f.minCoeff() < 1e-2);
  CHECK_NOTHROW(GpTask{c});
}

TEST_CASE("gp config: validation and JSON round trip") {
  GpConfig c;
  c.lengthscale = 0.1;
  c.probes = 3;
  const GpConfig back = gp_config_from_json(to_json(c), GpConfig{});
  CHECK(back.lengthscale == 0.1);
  CHECK(back.probes == 3);
  CHECK_THROWS_WITH_AS(gp_config_from_json({{"lenghtscale", 1.0}}, c), doctest::Contains("lenghtscale"),
                       std::invalid_argument);
  CHECK_THROWS_AS(gp_config_from_json({{"noise", 0.0}}, c), std::invalid_argument);
  CHECK(gp_grid(c).size() == 65);
  CHECK(gp_grid(c)[32] == 0.5);
}

TEST_CASE("gp_posterior: prior, interpolation limit, y-independence, oracle") {
  GpConfig c;
  const auto post0 = gp_posterior(c, {}, {});
  CHECK(post0.mean.isZero(0.0));
  CHECK((post0.variance.array() == c.variance).all());

  GpConfig tight = c;
  tight.noise = 1e-10;
  const double x[1] = {0.5}, y[1] = {1.7};
  const auto p1 = gp_posterior(tight, x, y);
  CHECK(p1.mean[32] == doctest::Approx(1.7).epsilon(1e-8));
  CHECK(p1.variance[32] < 1e-8);

  const double xs[2] = {0.2, 0.7}, ya[2] = {0.3, -1.0}, yb[2] = {5.0, 2.0};
  CHECK((gp_posterior(c, xs, ya).variance - gp_posterior(c, xs, yb).variance).norm() == 0.0);

  const auto g = gp_grid(c);
  const auto p2 = gp_posterior(c, xs, ya);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(p2.variance[static_cast<Eigen::Index>(i)] ==
          doctest::Approx(std::max(0.0, var_oracle(c, g[i], {0.2, 0.7}))).epsilon(1e-9).scale(1.0));
  }
  CHECK_THROWS_AS(gp_posterior(c, xs, std::span<const double>(ya, 1)), std::invalid_argument);
}

TEST_CASE("gp_posterior: variance never exceeds the prior (property)") {
  GpConfig c;
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> xs(1 + trial % 3), ys(xs.size());
    for (auto& v : xs) v = uniform(rng, 0.0, 1.0);
    for (auto& v : ys) v = standard_normal(rng);
    const auto p = gp_posterior(c, xs, ys);
    CHECK(p.variance.maxCoeff() <= c.variance + 1e-12);
    CHECK(p.variance.minCoeff() >= 0.0);
  }
}

TEST_CASE("imse: constant, zero, piecewise linear") {
  CHECK(imse(std::vector<double>(65, 0.37)) == doctest::Approx(0.37).epsilon(1e-12));
  CHECK(imse(std::vector<double>(65, 0.0)) == 0.0);
  // |x - 1/2| integrates to 1/4; its kink sits on a grid point
  std::vector<double> v(65);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::abs(static_cast<double>(i) / 64.0 - 0.5);
  CHECK(std::abs(imse(v) - 0.25) < 1e-9);
  // 1 + 2x on a coarse grid integrates to 2
  CHECK(std::abs(imse(std::vector<double>{1.0, 2.0, 3.0}) - 2.0) < 1e-12);
}

TEST_CASE("myopic baseline: midpoint first, second away, ties to lowest x, deterministic") {
  GpConfig c;
  CHECK(myopic_next_design(c, {}) == 0.5);
  const double first[1] = {0.5};
  const double second = myopic_next_design(c, first);
  CHECK(second != 0.5);
  CHECK(second < 0.5);  // x and 1 - x tie by symmetry
  CHECK(myopic_designs(c) == std::vector<double>{0.5, second});
  CHECK(myopic_designs(c) == myopic_designs(c));
}

TEST_CASE("myopic two-probe IMSE >= brute-force optimum") {
  GpConfig c;
  const auto g = gp_grid(c);
  double best = 1e300;
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = i; j < g.size(); ++j) best = std::min(best, imse_oracle(c, {g[i], g[j]}));
  const double opt = optimal_pair_imse(c);
  CHECK(opt == doctest::Approx(best).epsilon(1e-9));
  const double myopic = imse(gp_posterior_variance(c, myopic_designs(c)));
  CHECK(myopic == doctest::Approx(imse_oracle(c, myopic_designs(c))).epsilon(1e-9));
  CHECK(myopic >= opt);
  CHECK(myopic - opt > 0.05);  // two probes leave room for non-myopia here
}

TEST_CASE("GpTask: snapping, encoding round trip, masking, reward") {
  GpConfig c;
  const GpTask task(c);
  CHECK(task.snap(0.495) == 0.5);
  CHECK(task.snap(0.49) == 31.0 / 64.0);
  CHECK(task.snap(-3.0) == 0.0);
  CHECK(task.snap(7.0) == 1.0);
  Rng rng(5);
  const Vector f = task.sample_latent(rng);
  REQUIRE(f.size() == 65);

  nlohmann::json out;
  Rng r1(9);
  const EncodedRecord rec = task.run(f, Vector{{0.503}}, r1, &out);
  CHECK(rec.flat[0] == 0.5);
  CHECK(std::abs(rec.flat[1] - f[32]) < 0.1);
  CHECK(task.encode(Vector{{0.503}}, out).flat == rec.flat);
  const EncodedRecord m = task.mask(rec);
  CHECK(m.flat[0] == 0.5);
  CHECK(m.flat[1] == 0.0);
  CHECK(m.flat[2] == 0.0);

  const std::vector<RecordPtr> none;
  CHECK(task.reward(f, {}, none) == doctest::Approx(-imse(f.array().square().matrix().eval())));
  const std::vector<RecordPtr> one{std::make_shared<const EncodedRecord>(rec)};
  const double xs[1] = {rec.flat[0]}, ys[1] = {rec.flat[1]};
  CHECK(task.reward(f, {}, one) == doctest::Approx(-task.l2(f, gp_posterior(c, xs, ys).mean)));
  const std::vector<RecordPtr> masked{std::make_shared<const EncodedRecord>(m)};
  CHECK(task.reward(f, {}, masked) == task.reward(f, {}, none));
}

TEST_CASE("logistic_trial: symmetric probability and Monte-Carlo frequency") {
  CHECK(logistic_probability(0.0, 0.0) == 0.5);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double th = uniform(rng, -8, 8), d = uniform(rng, -10, 10);
    CHECK(logistic_probability(th, d) == doctest::Approx(1.0 - logistic_probability(-th, -d)).epsilon(1e-12));
  }
  Rng r(2024);
  int ones = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const int y = logistic_trial(1.0, 1.0, r);
    REQUIRE((y == 0 || y == 1));
    ones += y;
  }
  CHECK(std::abs(static_cast<double>(ones) / n - 1.0 / (1.0 + std::exp(-2.0))) <= 0.005);
  CHECK_THROWS_AS(logistic_trial(std::nan(""), 0.0, r), std::invalid_argument);
}

TEST_CASE("LogisticTask: normalisation, records, reward, degenerate prior") {
  const LogisticTask task(LogisticConfig{});
  CHECK(task.target(Vector{{-8.0}})[0] == 0.0);
  CHECK(task.target(Vector{{8.0}})[0] == 1.0);
  CHECK(task.denormalise(task.target(Vector{{2.5}}))[0] == doctest::Approx(2.5));
  CHECK(task.reward(Vector{{0.0}}, Vector{{0.75}}, {}) == doctest::Approx(-0.0625));

  Rng rng(3);
  nlohmann::json out;
  const EncodedRecord rec = task.run(Vector{{1.0}}, Vector{{-5.0}}, rng, &out);
  CHECK(rec.flat[0] == -0.5);
  CHECK(task.encode(Vector{{-5.0}}, out).flat == rec.flat);
  CHECK(task.mask(rec).flat == Vector{{-0.5, 0.0, 0.0}});
  CHECK_THROWS_AS(task.encode(Vector{{0.0}}, {{"y", 2}}), std::invalid_argument);

  LogisticConfig deg;
  deg.theta = {3.0, 3.0};
  const LogisticTask d(deg);
  Rng r(1);
  CHECK(d.sample_latent(r)[0] == 3.0);
  CHECK(d.denormalise(Vector{{0.9}})[0] == 3.0);

  CHECK_THROWS_AS(logistic_config_from_json({{"trials", 0}}, LogisticConfig{}), std::invalid_argument);
  CHECK_THROWS_AS(logistic_config_from_json({{"thetaa", {0, 1}}}, LogisticConfig{}), std::invalid_argument);
  CHECK(logistic_config_from_json(to_json(deg), LogisticConfig{}).theta.hi == 3.0);
}

TEST_CASE("mean_stderr: hand case, constant input, bands") {
  const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  const MeanStderr m = mean_stderr(xs);
  CHECK(m.mean == 2.5);
  CHECK(m.stderr_ == doctest::Approx(std::sqrt(1.25) / 2.0));
  const MeanStderr k = mean_stderr(std::vector<double>(1000, 0.1));
  CHECK(k.stderr_ == 0.0);
  CHECK(k.mean == 0.1);
  CHECK(band_below(MeanStderr{1.0, 0.1, 10}, MeanStderr{1.5, 0.1, 10}));
  CHECK_FALSE(band_below(MeanStderr{1.0, 0.2, 10}, MeanStderr{1.5, 0.1, 10}));
}

TEST_CASE("evaluate_nonmyopic: exact baseline has zero spread") {
  const GpTask task(GpConfig{});
  Rng rng(1);
  const SetPolicy p(small_dims(task, 2), rng);
  const NonmyopicReport r = evaluate_nonmyopic(p, task, 50, 3);
  CHECK(r.myopic_imse.stderr_ == 0.0);
  CHECK(r.myopic_designs[0] == 0.5);
  CHECK(r.analyst_imse.n == 50);
  CHECK(r.myopic_imse.mean >= r.optimal_imse);
  CHECK(r.analyst_imse.mean >= r.optimal_imse - 1e-12);
  const NonmyopicReport again = evaluate_nonmyopic(p, task, 50, 3);
  CHECK(again.analyst_l2.mean == r.analyst_l2.mean);
}

TEST_CASE("evaluate_adaptivity: degenerate prior leaves nothing to infer") {
  LogisticConfig c;
  c.theta = {1.5, 1.5};
  c.trials = 4;
  const LogisticTask task(c);
  Rng rng(2);
  const SetPolicy p(small_dims(task, 4), rng);
  const AdaptivityReport r = evaluate_adaptivity(p, p, p, task, 200, 5);
  CHECK(r.adaptive.mean == doctest::Approx(0.0).scale(1.0));
  CHECK(r.non_adaptive.mean == doctest::Approx(0.0).scale(1.0));
  CHECK(r.random.mean == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("run_demo: missing checkpoint is rejected, trained checkpoints evaluate") {
  DemoConfig c = desk_demo_config();
  c.logistic.trials = 3;
  c.adaptivity_dims = small_dims(LogisticTask(c.logistic), 3);
  c.adaptivity_ppo.total_steps = 64;
  c.adaptivity_ppo.n_envs = 2;
  c.adaptivity_ppo.n_steps = 16;
  c.adaptivity_ppo.epochs = 1;
  c.adaptivity_ppo.segment_length = 3;
  c.adaptivity_episodes = 20;
  const auto dir = scratch("adapt");
  CHECK_THROWS_AS(run_demo(DemoKind::Adaptivity, c, dir), CheckpointError);
  train_demo(DemoKind::Adaptivity, c, dir);
  const nlohmann::json out = run_demo(DemoKind::Adaptivity, c, dir);
  CHECK(out.at("adaptive").at("n") == 20);
  CHECK(std::filesystem::exists(dir / "metrics.tsv"));
  CHECK(std::filesystem::exists(dir / "episodes.tsv"));
  CHECK(std::filesystem::exists(dir / "adaptive_metrics.tsv"));
  // a checkpoint for another task is refused
  std::filesystem::copy_file(dir / "adaptive.ckpt", dir / "nonmyopic.ckpt");
  CHECK_THROWS_AS(run_demo(DemoKind::Nonmyopic, c, dir), CheckpointError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("demo config: JSON round trip and unknown keys") {
  const DemoConfig c = desk_demo_config();
  const DemoConfig back = demo_config_from_json(to_json(c), DemoConfig{});
  CHECK(to_json(back) == to_json(c));
  CHECK_THROWS_WITH_AS(demo_config_from_json({{"adaptivity_ppo", {{"lr", 1.0}}}}, c), doctest::Contains("lr"),
                       std::invalid_argument);
  CHECK(demo_kind_from_string("nonmyopic") == DemoKind::Nonmyopic);
  CHECK_THROWS_AS(demo_kind_from_string("myopic"), std::invalid_argument);
}
