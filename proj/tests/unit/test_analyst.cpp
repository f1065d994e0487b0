#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "aed/analyst/analyst_env.hpp"
#include "aed/analyst/pointing_task.hpp"
#include "aed/rl/gae.hpp"

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

SetPolicyDims tiny_dims(Architecture arch, RecordLayout layout, std::size_t est) {
  SetPolicyDims d;
  d.architecture = arch;
  d.layout = layout;
  d.action_dim = 2;
  d.estimate_dim = est;
  d.max_records = 4;
  d.encoder = {6, 5};
  d.global = {4};
  d.trunk = {7};
  d.head = {5};
  return d;
}

RecordPtr random_record(Rng& rng, RecordLayout layout, Eigen::Index pairs) {
  EncodedRecord r;
  r.flat = Vector(static_cast<Eigen::Index>(layout.flat_dim));
  for (auto& v : r.flat) v = uniform(rng, -1.0, 1.0);
  r.pairs = Matrix(layout.pair_dim > 0 ? pairs : 0, static_cast<Eigen::Index>(layout.pair_dim));
  for (Eigen::Index i = 0; i < r.pairs.rows(); ++i)
    for (Eigen::Index j = 0; j < r.pairs.cols(); ++j) r.pairs(i, j) = uniform(rng, -1.0, 1.0);
  return std::make_shared<const EncodedRecord>(std::move(r));
}

double max_abs_diff(const Vector& a, const Vector& b) { return (a - b).cwiseAbs().maxCoeff(); }

// Scalar probe loss over all three outputs with fixed random weights.
struct Probe {
  Matrix cm, ce;
  Vector cv;
  double eval(const PolicyOutputs& o) const {
    return (o.mean.array() * cm.array()).sum() + (o.value.array() * cv.array()).sum() +
           (o.estimate.array() * ce.array()).sum();
  }
};

}  // namespace

TEST_CASE("discrepancy: hand cases, symmetry, mismatch") {
  const std::vector<double> a{0.2, 0.9}, b{0.5, 0.9};
  CHECK(discrepancy(a, a) == 0.0);
  CHECK(discrepancy(a, b) == doctest::Approx(-0.3).epsilon(1e-14));
  const std::vector<double> ra{0.9, 0.2}, rb{0.9, 0.5};
  CHECK(discrepancy(ra, rb) == discrepancy(a, b));
  const std::vector<double> c{0.1};
  CHECK_THROWS_AS(discrepancy(a, c), std::invalid_argument);
}

TEST_CASE("pooled encoder: mean of one, idempotence, permutation invariance, null embedding") {
  Rng rng(1);
  const RecordLayout layout{kSummaryRecordDim, 0};
  const SetPolicy p(tiny_dims(Architecture::Pooled, layout, 1), rng);
  const auto r1 = random_record(rng, layout, 0), r2 = random_record(rng, layout, 0), r3 = random_record(rng, layout, 0);
  Matrix x(1, static_cast<Eigen::Index>(layout.flat_dim));
  x.row(0) = r1->flat.transpose();
  const Vector direct = p.encoder().forward(x).row(0).transpose();
  CHECK(max_abs_diff(p.embed({{r1}}), direct) <= 1e-15);
  CHECK(max_abs_diff(p.embed({{r1, r1}}), p.embed({{r1}})) <= 1e-15);
  CHECK(max_abs_diff(p.embed({{r1, r2, r3}}), p.embed({{r3, r1, r2}})) <= 1e-12);
  const Vector null = p.embed({});
  CHECK(null.size() == 5);
  CHECK(max_abs_diff(p.embed({}), null) == 0.0);
}

TEST_CASE("relational encoder: empty sums, hand-computed Eq. 2-3, permutation and order") {
  Rng rng(3);
  const RecordLayout layout{3, 2};
  SetPolicyDims d = tiny_dims(Architecture::Relational, layout, 1);
  d.encoder = {2};
  d.global = {2};
  SetPolicy p(d, rng);

  // f_enc(x) = relu(x W + b), g(y) = relu(y V + c), written out by hand.
  auto f_enc = [&](const Vector& x) {
    Vector out(2);
    for (int j = 0; j < 2; ++j) {
      double s = p.encoder().bias(0)[j];
      for (int i = 0; i < x.size(); ++i) s += x[i] * p.encoder().weight(0)(i, j);
      out[j] = std::max(0.0, s);
    }
    return out;
  };
  auto g = [&](const Vector& el, const Vector& ctx) {
    Vector in(5);
    in << el, ctx;
    Vector out(2);
    for (int j = 0; j < 2; ++j) {
      double s = p.global().bias(0)[j];
      for (int i = 0; i < 5; ++i) s += in[i] * p.global().weight(0)(i, j);
      out[j] = std::max(0.0, s);
    }
    return out;
  };

  EncodedRecord two;
  two.flat = Vector{{0.3, -0.2, 0.7}};
  two.pairs = Matrix{{0.1, 0.4}, {-0.5, 0.9}};
  Vector el = Vector::Zero(2);
  for (int k = 0; k < 2; ++k) {
    Vector x(5);
    x << two.flat, two.pairs.row(k).transpose();
    el += f_enc(x);
  }
  const auto rtwo = std::make_shared<const EncodedRecord>(two);
  CHECK(max_abs_diff(p.embed({{rtwo}}), g(el, two.flat)) <= 1e-12);

  EncodedRecord one;
  one.flat = Vector{{-0.1, 0.6, 0.2}};
  one.pairs = Matrix(0, 2);
  const auto rone = std::make_shared<const EncodedRecord>(one);
  CHECK(max_abs_diff(p.embed({{rone}}), g(Vector::Zero(2), one.flat)) <= 1e-15);
  CHECK(max_abs_diff(p.embed({{rone, rtwo}}), g(Vector::Zero(2), one.flat) + g(el, two.flat)) <= 1e-12);

  Rng r2(4);
  SetPolicy big(tiny_dims(Architecture::Relational, {kContextDim, kPairDim}, 3), r2);
  std::vector<RecordPtr> recs;
  for (int i = 0; i < 4; ++i) recs.push_back(random_record(r2, {kContextDim, kPairDim}, 1 + i));
  auto shuffled = recs;
  std::reverse(shuffled.begin(), shuffled.end());
  CHECK(max_abs_diff(big.embed({recs}), big.embed({shuffled})) <= 1e-12);

  // Swapping two non-adjacent fixations changes the episode embedding.
  EncodedRecord seq;
  seq.flat = Vector::Constant(kContextDim, 0.1);
  const Matrix fix{{0.1, 0.2, 1.0}, {0.5, -0.3, 1.2}, {-0.4, 0.8, 0.9}};
  auto pairs_of = [](const Matrix& f) {
    Matrix out(f.rows() - 1, 6);
    for (Eigen::Index k = 0; k + 1 < f.rows(); ++k) out.row(k) << f.row(k), f.row(k + 1);
    return out;
  };
  seq.pairs = pairs_of(fix);
  Matrix swapped = fix;
  swapped.row(0) = fix.row(2);
  swapped.row(2) = fix.row(0);
  EncodedRecord seq2 = seq;
  seq2.pairs = pairs_of(swapped);
  const Vector ea = big.embed({{std::make_shared<const EncodedRecord>(seq)}});
  const Vector eb = big.embed({{std::make_shared<const EncodedRecord>(seq2)}});
  CHECK(max_abs_diff(ea, eb) > 1e-6);
}

TEST_CASE("set policy backward matches central finite differences") {
  for (Architecture arch : {Architecture::Pooled, Architecture::Relational}) {
    Rng rng(arch == Architecture::Pooled ? 5 : 6);
    const RecordLayout layout = arch == Architecture::Pooled ? RecordLayout{4, 0} : RecordLayout{3, 4};
    SetPolicy p(tiny_dims(arch, layout, 2), rng);
    // Give biases some spread so ReLU kinks are not sitting at zero.
    for (auto blk : p.parameter_blocks())
      for (auto& v : blk.value) v += 0.05 * standard_normal(rng);

    std::vector<RecordPtr> pool;
    for (int i = 0; i < 5; ++i) pool.push_back(random_record(rng, layout, i % 3));
    std::vector<AnalystObservation> obs{{}, {{pool[0]}}, {{pool[0], pool[1]}}, {{pool[2], pool[3], pool[4], pool[1]}}};
    std::vector<const AnalystObservation*> ptrs;
    for (const auto& o : obs) ptrs.push_back(&o);
    const auto view = std::span<const AnalystObservation* const>(ptrs);

    Probe probe{Matrix::Random(4, 2), Matrix::Random(4, 2), Vector::Random(4)};
    p.zero_grad();
    auto batch = p.forward_batch(view);
    p.backward_batch(batch, probe.cm, probe.cv, probe.ce);

    std::size_t checked = 0, ok = 0;
    for (auto blk : p.parameter_blocks()) {
      for (std::size_t i = 0; i < blk.value.size(); ++i) {
        const double keep = blk.value[i], h = 1e-6;
        blk.value[i] = keep + h;
        const double up = probe.eval(p.forward_batch(view).out);
        blk.value[i] = keep - h;
        const double down = probe.eval(p.forward_batch(view).out);
        blk.value[i] = keep;
        const double fd = (up - down) / (2 * h);
        const double an = blk.grad[i];
        ++checked;
        if (std::abs(fd - an) <= 1e-4 * std::max(1.0, std::abs(fd))) ++ok;
      }
    }
    // log_std does not enter the outputs; its gradient stays zero.
    CHECK(ok >= checked - checked / 100);
  }
}

TEST_CASE("set policy checkpoint round trip") {
  for (Architecture arch : {Architecture::Pooled, Architecture::Relational}) {
    Rng rng(7);
    const RecordLayout layout = arch == Architecture::Pooled ? RecordLayout{4, 0} : RecordLayout{3, 4};
    const SetPolicyDims d = tiny_dims(arch, layout, 2);
    SetPolicy p(d, rng);
    Checkpoint ck;
    ck.meta = {{"dims", to_json(d)}};
    p.store(ck, "analyst/");
    const Checkpoint back = deserialize(serialize(ck));
    SetPolicy q = SetPolicy::restore(back, "analyst/", set_dims_from_json(back.meta["dims"]));
    CHECK(flatten(p.parameter_blocks()) == flatten(q.parameter_blocks()));
  }
}

TEST_CASE("analyst_act: bounded designs under random weights, determinism, cold start") {
  auto user = tiny_user(Study::One);
  const PointingTask task(user);
  Rng rng(8);
  std::size_t draws = 0;
  for (int k = 0; k < 100; ++k) {
    SetPolicyDims d = default_analyst_dims(task, Architecture::Pooled, 4);
    d.encoder = {8};
    d.trunk = {8};
    d.head = {8};
    d.initial_log_std = 1.5;
    SetPolicy p(d, rng);
    for (auto blk : p.parameter_blocks())
      for (auto& v : blk.value) v = 3.0 * standard_normal(rng);
    AnalystObservation obs;
    for (int i = 0; i < 1000; ++i) {
      if (i % 250 == 0) obs.records.clear();
      const auto dec = analyst_act(p, task, obs, SampleMode::Stochastic, rng);
      CHECK(task.design_range(0).lo <= dec.action.design[0]);
      CHECK(dec.action.design[0] <= task.design_range(0).hi);
      CHECK(task.design_range(1).lo <= dec.action.design[1]);
      CHECK(dec.action.design[1] <= task.design_range(1).hi);
      CHECK(dec.action.estimate.minCoeff() >= 0.0);
      CHECK(dec.action.estimate.maxCoeff() <= 1.0);
      ++draws;
      if (obs.records.size() < 4) obs.records.push_back(random_record(rng, task.layout(), 0));
    }
  }
  CHECK(draws == 100000);

  Rng r2(9);
  SetPolicy p(default_analyst_dims(task, Architecture::Pooled, 4), r2);
  const auto a = analyst_act(p, task, {}, SampleMode::Deterministic, r2);
  const auto b = analyst_act(p, task, {}, SampleMode::Deterministic, r2);
  CHECK(a.action.design == b.action.design);
  CHECK(a.action.estimate == b.action.estimate);
  CHECK(a.action.design.allFinite());
}

TEST_CASE("analyst_reset: determinism and prior marginals") {
  auto user = tiny_user(Study::Two);
  const PointingTask task(user);
  Rng a(10), b(10);
  CHECK(analyst_reset(task, a).latent == analyst_reset(task, b).latent);

  // Kolmogorov-Smirnov against each uniform prior marginal.
  const int n = 10000;
  for (ParamId id : task.estimated()) {
    std::vector<double> u;
    for (int i = 0; i < n; ++i) {
      const Vector l = analyst_reset(task, a).latent;
      u.push_back(normalise(task.prior(), id, l[static_cast<Eigen::Index>(id)]));
    }
    std::sort(u.begin(), u.end());
    double dmax = 0.0;
    for (int i = 0; i < n; ++i) {
      dmax = std::max({dmax, std::abs((i + 1.0) / n - u[static_cast<std::size_t>(i)]),
                       std::abs(u[static_cast<std::size_t>(i)] - static_cast<double>(i) / n)});
    }
    CHECK(dmax < 1.36 / std::sqrt(static_cast<double>(n)));
  }
}

TEST_CASE("analyst_step: exact estimate, horizon, memory growth, design clipping") {
  auto user = tiny_user(Study::Two);
  const PointingTask task(user);
  Rng rng(11);
  AnalystEnvConfig cfg;
  cfg.experiments = 4;
  AnalystEpisode ep = analyst_reset(task, rng, cfg);
  const Vector truth = task.target(ep.latent);
  for (int t = 1; t <= 4; ++t) {
    const auto r = analyst_step(task, ep, {Vector{{0.5, 0.1}}, truth}, rng);
    CHECK(r.reward == 0.0);
    CHECK(r.observation.records.size() == static_cast<std::size_t>(t));
    CHECK(r.done == (t == 4));
  }
  CHECK_THROWS_AS(analyst_step(task, ep, {Vector{{0.5, 0.1}}, truth}, rng), StepError);

  AnalystEpisode ep2 = analyst_reset(task, rng, cfg);
  const auto r = analyst_step(task, ep2, {Vector{{3.0, 0.001}}, Vector::Constant(3, 0.5)}, rng);
  CHECK(r.reward <= 0.0);
  CHECK(ep2.log[0].clipped);
  CHECK(ep2.log[0].design[0] == task.design_range(0).hi);
  CHECK(ep2.log[0].design[1] == task.design_range(1).lo);
}

TEST_CASE("masked outcomes stay hidden until the last experiment") {
  auto user = tiny_user(Study::Two);
  const PointingTask task(user);
  Rng rng(12);
  AnalystEnvConfig cfg;
  cfg.mask_outcomes = true;
  AnalystEpisode ep = analyst_reset(task, rng, cfg);
  for (int t = 1; t <= 4; ++t) {
    run_experiment(task, ep, Vector{{0.8, 0.05}}, rng);
    for (const auto& r : ep.visible) {
      if (t < 4) {
        CHECK(r->flat[2] == 0.0);
        CHECK(r->pairs.rows() == 0);
        CHECK(r->flat.tail(kContextDim - 2).cwiseAbs().maxCoeff() == 0.0);
      } else {
        CHECK(r->flat[2] == 1.0);
      }
    }
  }
  CHECK(ep.visible == ep.records);
}

TEST_CASE("latent privacy: observations ignore parameters that do not reach outcomes") {
  auto user = tiny_user(Study::Two);
  const PointingTask task(user);
  Rng seed(13);
  Vector l1 = analyst_reset(task, seed).latent, l2 = l1;
  l2[static_cast<Eigen::Index>(ParamId::RMax)] = 3.0;  // unused outside Study 3
  AnalystEpisode a, b;
  a.latent = l1;
  b.latent = l2;
  Rng ra(14), rb(14);
  for (int t = 0; t < 4; ++t) {
    run_experiment(task, a, Vector{{0.6, 0.04}}, ra);
    run_experiment(task, b, Vector{{0.6, 0.04}}, rb);
  }
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a.visible[i]->flat == b.visible[i]->flat);
    CHECK(a.visible[i]->pairs == b.visible[i]->pairs);
  }
}

TEST_CASE("encode_outcome: boundary, constant width, round trips") {
  for (Study s : {Study::One, Study::Two, Study::Three}) {
    auto user = tiny_user(s);
    const PointingTask task(user);
    Rng rng(15);
    const RecordLayout lay = task.layout();
    for (int i = 0; i < 200; ++i) {
      const Vector latent = task.sample_latent(rng);
      const Vector design = sample_design(task, rng);
      nlohmann::json outcome;
      const EncodedRecord r = task.run(latent, design, rng, &outcome);
      CHECK(static_cast<std::size_t>(r.flat.size()) == lay.flat_dim);
      const EncodedRecord again = task.encode(design, nlohmann::json::parse(outcome.dump()));
      CHECK(again.flat == r.flat);
      CHECK(again.pairs == r.pairs);
      if (s == Study::One) continue;
      CHECK(static_cast<std::size_t>(r.pairs.cols()) == lay.pair_dim);
      const EpisodeTrace t = trace_from_json(outcome);
      CHECK(r.pairs.rows() == static_cast<Eigen::Index>(std::max<std::size_t>(1, t.fixations.size()) - 1));
      const DecodedFixations dec = decode_fixations(r);
      REQUIRE(dec.fixations.size() == t.fixations.size());
      for (std::size_t k = 0; k < t.fixations.size(); ++k) {
        CHECK(std::abs(dec.fixations[k][0] - t.fixations[k][0]) <= 1e-12);
        CHECK(std::abs(dec.fixations[k][1] - t.fixations[k][1]) <= 1e-12);
        CHECK(std::abs(dec.durations[k] - t.durations[k]) <= 1e-12);
      }
    }
  }
  EpisodeTrace single;
  single.fixations = {{0.3, 0.1}};
  single.durations = {0.12};
  const auto r = encode_outcome(single, Study::Two, 20);
  CHECK(r.pairs.rows() == 0);
  CHECK(r.flat.size() == static_cast<Eigen::Index>(kContextDim));
}

TEST_CASE("analyst env: replay accounting and discounted credit") {
  auto user = tiny_user(Study::One);
  auto task = std::make_shared<const PointingTask>(user);
  Rng rng(16);
  const SetPolicy p(default_analyst_dims(*task, Architecture::Pooled, 4), rng);
  AnalystEnvConfig cfg;
  VecEnv<AnalystEnv> envs({AnalystEnv(task, cfg, 77, &p)}, 5);
  auto buf = collect_rollouts(p, envs, 8);
  REQUIRE(buf.episode_returns.size() == 2);

  // Replay: same env seed, same actions.
  AnalystEnv replay(task, cfg, 77, &p);
  replay.reset();
  double ret = 0.0;
  std::vector<double> rewards;
  for (std::size_t t = 0; t < 4; ++t) {
    const auto s = replay.step(buf.actions[t]);
    rewards.push_back(s.reward);
    ret += s.reward;
    CHECK(s.reward == buf.rewards[t]);
    CHECK(s.reward <= 0.0);
  }
  CHECK(std::abs(ret - buf.episode_returns[0]) <= 1e-12);

  compute_gae(buf, 0.9, 1.0, false);
  double disc = 0.0;
  for (std::size_t t = 0; t < 4; ++t) disc += std::pow(0.9, static_cast<double>(t)) * rewards[t];
  CHECK(std::abs(buf.returns[0] - disc) <= 1e-12);
  CHECK(buf.supervision.size() == 2);
  CHECK(buf.supervision[0].first.records.size() == 4);
}
