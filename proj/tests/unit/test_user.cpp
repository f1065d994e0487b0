#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "aed/user/user_model.hpp"

using namespace aed;

namespace {

PointingConfig config(Study s) {
  PointingConfig c;
  c.study = s;
  return c;
}

PointingObservation detected_obs(double x, double y, double w, double var_xy, double var_w) {
  PointingObservation o;
  o.x = x;
  o.y = y;
  o.w = w;
  o.detected = true;
  o.variance = {var_xy, var_xy, var_w};
  return o;
}

}  // namespace

TEST_CASE("sample_user_params: degenerate prior, moments, masks") {
  Prior p = default_prior(Study::Two);
  p[ParamId::RhoOcular] = {0.17, 0.17};
  Rng rng(1);
  for (int i = 0; i < 100; ++i) CHECK(sample_user_params(p, rng, Study::Two).rho_ocular == 0.17);

  const Prior q = default_prior(Study::Two);
  double sum = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) sum += sample_user_params(q, rng, Study::Two).rho_ocular;
  CHECK(std::abs(sum / n - 0.225) <= 0.01);

  const Prior s1 = default_prior(Study::One);
  const UserParams first = sample_user_params(s1, rng, Study::One);
  bool ocular_varies = false;
  for (int i = 0; i < 200; ++i) {
    const UserParams u = sample_user_params(s1, rng, Study::One);
    for (std::size_t k = 0; k < kNumParams; ++k) {
      const auto id = static_cast<ParamId>(k);
      if (id == ParamId::RhoOcular) ocular_varies |= u[id] != first[id];
      else CHECK(u[id] == first[id]);
    }
  }
  CHECK(ocular_varies);

  Prior bad = q;
  bad[ParamId::ThetaB] = {0.2, 0.1};
  CHECK_THROWS_AS(sample_user_params(bad, rng, Study::Two), std::invalid_argument);
}

TEST_CASE("reset: polar placement and symmetry") {
  const auto s = reset_at({0.8, 0.1}, 0.0);
  CHECK(s.tx == doctest::Approx(0.8));
  CHECK(s.ty == doctest::Approx(0.0));
  CHECK(s.fx == 0.0);
  CHECK(s.step == 0);
  const auto z = reset_at({0.0, 0.1}, 1.3);
  CHECK(z.tx == 0.0);
  CHECK(z.ty == 0.0);
  CHECK_THROWS_AS(reset_at({1.5, 0.1}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(reset_at({0.5, 0.0}, 0.0), std::invalid_argument);

  Rng rng(2);
  double mx = 0.0, my = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto r = reset({0.7, 0.1}, UserParams{}, rng);
    mx += r.tx;
    my += r.ty;
  }
  CHECK(std::abs(mx / n) < 0.02);
  CHECK(std::abs(my / n) < 0.02);
}

TEST_CASE("step: zero noise lands on the target") {
  UserParams p;
  p.rho_ocular = 0.0;
  Rng rng(3);
  for (Study st : {Study::One, Study::Two}) {
    auto s = reset_at({0.6, 0.05}, 0.4);
    Intent in{s.tx, s.ty, false};
    const auto out = step(config(st), s, in, p, rng);
    CHECK(out.done);
    CHECK(out.success);
    CHECK(s.fx == doctest::Approx(s.tx));
    CHECK_THROWS_AS(step(config(st), s, in, p, rng), StepError);
  }
}

TEST_CASE("step: duration model reward") {
  UserParams p;
  p.rho_ocular = 0.0;
  p.theta_a = 0.05;
  p.theta_b = 0.1;
  Rng rng(4);
  auto s = reset_at({0.9, 0.02}, 0.0);
  const auto out = step(config(Study::Two), s, Intent{0.5, 0.0, false}, p, rng);
  CHECK(out.amplitude == doctest::Approx(0.5));
  CHECK(out.reward == doctest::Approx(-0.125).epsilon(1e-14));
  CHECK(out.duration == doctest::Approx(0.125).epsilon(1e-14));
}

TEST_CASE("step: Study 3 keypress rewards") {
  UserParams p;
  p.rho_ocular = 0.0;
  p.theta_pref = 1.0;
  p.r_max = 10.0;
  Rng rng(5);
  auto cfg = config(Study::Three);
  auto s = reset_at({0.3, 0.1}, 0.0);
  auto move = step(cfg, s, Intent{0.3, 0.0, false}, p, rng);
  CHECK_FALSE(move.done);  // Study 3 needs a keypress
  auto press = step(cfg, s, Intent{0.0, 0.0, true}, p, rng);
  CHECK(press.done);
  CHECK(press.keypress);
  CHECK(press.reward == doctest::Approx(10.0));

  auto miss = reset_at({0.3, 0.1}, 0.0);
  p.theta_pref = 0.4;
  auto wrong = step(cfg, miss, Intent{0.0, 0.0, true}, p, rng);
  CHECK(wrong.reward == doctest::Approx(-4.0));
  CHECK_FALSE(wrong.success);
}

TEST_CASE("step: max steps adds the termination penalty; per-step rewards are negative") {
  UserParams p;
  Rng rng(6);
  auto cfg = config(Study::Two);
  cfg.max_steps = 5;
  auto s = reset_at({0.9, 0.02}, 0.0);
  StepOutcome out;
  for (int i = 0; i < 5; ++i) {
    out = step(cfg, s, Intent{-0.5, 0.5 * (i % 2), false}, p, rng);
    if (i < 4) {
      CHECK(out.reward < 0.0);
      CHECK_FALSE(out.done);
    }
  }
  CHECK(out.done);
  CHECK(out.reward < cfg.termination_penalty);
}

TEST_CASE("step: motor noise std scales with amplitude") {
  UserParams p;
  p.rho_ocular = 0.2;
  Rng rng(7);
  auto cfg = config(Study::One);
  const int n = 100000;
  double sx = 0.0, sxx = 0.0;
  for (int i = 0; i < n; ++i) {
    PointingState s;
    s.fx = -0.25;
    s.tx = 0.9;
    s.ty = 0.9;
    s.w = 0.01;
    step(cfg, s, Intent{0.25, 0.0, false}, p, rng);
    const double e = s.fx - 0.25;
    sx += e;
    sxx += e * e;
  }
  const double sd = std::sqrt(sxx / n - (sx / n) * (sx / n));
  CHECK(std::abs(sd - 0.2 * 0.5) <= 0.02 * 0.2 * 0.5);
}

TEST_CASE("detection_prob: boundary, monotonicity and gap") {
  const PointingConfig cfg;
  PointingState s;
  s.w = 1.0;
  CHECK(detection_prob(cfg, s) >= 0.99);
  for (double w = 0.02; w <= 0.3; w += 0.02) {
    double prev = 2.0;
    for (double ecc = 0.0; ecc <= 1.4; ecc += 0.05) {
      PointingState t;
      t.tx = ecc;
      t.w = w;
      const double pr = detection_prob(cfg, t);
      CHECK(pr < prev);
      prev = pr;
    }
  }
  PointingState far, near;
  far.tx = 1.2;
  far.w = 0.05;
  near.tx = 0.3;
  near.w = 0.05;
  const double oracle_far = 1.0 / (1.0 + std::exp(-(2.0 + 8.0 * 0.05 - 4.0 * 1.2)));
  CHECK(detection_prob(cfg, far) == doctest::Approx(oracle_far).epsilon(1e-14));
  CHECK(detection_prob(cfg, near) - detection_prob(cfg, far) >= 0.2);
}

TEST_CASE("belief_update: Kalman hand cases") {
  Belief b;
  b.detected = true;
  b.mean = {0.2, 0.2, 0.2};
  b.var = {0.04, 0.04, 0.04};
  const auto out = belief_update(b, detected_obs(0.6, 0.6, 0.6, 0.12, 0.12));
  CHECK(std::abs(out.mean[0] - 0.3) <= 1e-12);
  CHECK(std::abs(out.var[0] - 0.03) <= 1e-12);

  const auto mid = belief_update(b, detected_obs(0.6, 0.0, 0.2, 0.04, 0.04));
  CHECK(mid.mean[0] == doctest::Approx(0.4));
  CHECK(mid.mean[1] == doctest::Approx(0.1));

  PointingObservation missed;
  CHECK(belief_update(b, missed).mean == b.mean);

  Belief empty;
  const auto first = belief_update(empty, detected_obs(0.1, -0.2, 0.05, 0.01, 0.0004));
  CHECK(first.detected);
  CHECK(first.mean[1] == -0.2);
  CHECK(first.var[0] == 0.01);
  CHECK_THROWS_AS(belief_update(b, detected_obs(0, 0, 0, 0.0, 0.1)), std::invalid_argument);
}

TEST_CASE("belief_update: equal-variance fusion equals the batch mean, order-free, shrinking") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 9;
    const double var = 0.001 + uniform(rng, 0.0, 0.05);
    std::vector<std::array<double, 3>> obs(static_cast<std::size_t>(n));
    for (auto& o : obs)
      for (auto& v : o) v = uniform(rng, -1.0, 1.0);
    auto fuse = [&](const std::vector<std::array<double, 3>>& seq) {
      Belief b;
      double prev = 1e9;
      for (const auto& o : seq) {
        b = belief_update(b, detected_obs(o[0], o[1], o[2], var, var));
        CHECK(b.var[0] < prev);
        prev = b.var[0];
      }
      return b;
    };
    const Belief b = fuse(obs);
    for (std::size_t k = 0; k < 3; ++k) {
      double mean = 0.0;
      for (const auto& o : obs) mean += o[k];
      mean /= n;
      CHECK(std::abs(b.mean[k] - mean) <= 1e-10);
      CHECK(std::abs(b.var[k] - var / n) <= 1e-10);
    }
    auto shuffled = obs;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const Belief c = fuse(shuffled);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(std::abs(b.mean[k] - c.mean[k]) <= 1e-12);
      CHECK(std::abs(b.var[k] - c.var[k]) <= 1e-12);
    }
  }
}

TEST_CASE("controller_input: layout") {
  const PointingConfig cfg;
  PointingState s;
  UserParams p;
  const auto x = controller_input(Belief{}, s, p, cfg);
  CHECK(x.size() == kControllerInputDim);
  CHECK(x[7] == kEmptyBeliefStd);
  CHECK(x[10] == 0.0);
  UserParams q = p;
  q.theta_pref = 0.9;
  const auto y = controller_input(Belief{}, s, q, cfg);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i == 15) CHECK(x[i] != y[i]);
    else CHECK(x[i] == y[i]);
  }
  for (Study st : {Study::One, Study::Two, Study::Three}) {
    PointingConfig c;
    c.study = st;
    CHECK(controller_input(Belief{}, s, p, c).size() == 16);
  }
}

TEST_CASE("run_episode: oracle, additivity, export round trip") {
  UserParams p;
  p.rho_ocular = 0.0;
  Rng rng(9);
  const auto t = run_episode(oracle_controller(Study::One), config(Study::One), {0.7, 0.05}, p, rng);
  CHECK(t.steps == 1);
  CHECK(t.success);

  UserParams noisy;
  noisy.rho_ocular = 0.35;
  noisy.rho_spatial = 0.3;
  for (Study st : {Study::One, Study::Two, Study::Three}) {
    for (int i = 0; i < 200; ++i) {
      const auto r = run_episode(random_controller(st), config(st), {0.9, 0.02}, noisy, rng);
      double sum = 0.0;
      for (double d : r.durations) sum += d;
      CHECK(std::abs(r.total_time - sum) <= 1e-12);
      CHECK(r.fixations.size() == r.durations.size());
      CHECK(r.steps <= 20);
      const auto back = trace_from_json(nlohmann::json::parse(to_json(r, "u1").dump()));
      CHECK(back.fixations == r.fixations);
      CHECK(back.durations == r.durations);
      CHECK(back.keypress_step == r.keypress_step);
    }
  }
}

TEST_CASE("user checkpoint round trip") {
  EnsembleTrainingConfig cfg;
  cfg.pointing.study = Study::Two;
  cfg.prior = default_prior(Study::Two);
  cfg.dims = default_controller_dims(Study::Two);
  cfg.ppo.n_envs = 2;
  cfg.ppo.n_steps = 32;
  cfg.ppo.total_steps = 64;
  cfg.ppo.epochs = 1;
  const UserModel m = train_ensemble(cfg);
  const auto path = std::filesystem::temp_directory_path() / "aed_user_rt.ckpt";
  save_user_model(m, path);
  const UserModel back = load_user_model(path);
  CHECK(back.config.study == Study::Two);
  CHECK(back.prior[ParamId::ThetaB].hi == m.prior[ParamId::ThetaB].hi);
  auto a = const_cast<MlpPolicy&>(m.policy).parameter_blocks();
  auto b = const_cast<MlpPolicy&>(back.policy).parameter_blocks();
  CHECK(flatten(a) == flatten(b));
  std::filesystem::remove(path);
}
