#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "aed/rl/ema.hpp"
#include "aed/rl/gae.hpp"
#include "aed/rl/ppo.hpp"
#include "aed/rl/rollout.hpp"

namespace aed {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct IterationMetrics {
  std::size_t iteration = 0;
  std::size_t steps = 0;  // cumulative environment steps
  double mean_episode_reward = 0.0;
  std::size_t episodes = 0;
  double learning_rate = 0.0;
  PpoStats ppo;
  double seconds = 0.0;
};

/// Header and row of the tab-separated training log.
std::string metrics_header();
std::string metrics_row(const IterationMetrics& m);

struct TrainOptions {
  PpoConfig ppo;
  RolloutOptions rollout;
  std::uint64_t seed = 0;
  std::ostream* metrics = nullptr;
  std::function<void(const IterationMetrics&)> on_iteration;
};

struct TrainResult {
  std::vector<IterationMetrics> history;
  std::size_t steps = 0;
  std::size_t aborted_updates = 0;
};

/// PPO training loop. When `shadow` is given it is kept equal to the EMA of
/// the live parameters (updated once per ppo_update); environments that read
/// it for rewards see a frozen copy during each rollout.
///
/// Throws TrainingError after restoring the last good weights if rewards turn
/// non-finite or updates abort three times in a row.
template <ActorCritic P, Environment Env>
  requires std::same_as<typename P::Observation, typename Env::Observation>
TrainResult train_ppo(P& policy, VecEnv<Env>& envs, const TrainOptions& opts, P* shadow = nullptr) {
  const PpoConfig& cfg = opts.ppo;
  validate(cfg);
  auto blocks = policy.parameter_blocks();
  AdamConfig adam;
  adam.learning_rate = cfg.learning_rate;
  adam.max_grad_norm = cfg.max_grad_norm;
  OptimState optim = make_optim_state(blocks, adam);
  EmaShadow ema = make_ema(blocks, cfg.ema_alpha);
  if (shadow != nullptr) assign(shadow->parameter_blocks(), ema.params);

  Rng update_rng(derive_seed(opts.seed, 0x5EED0F));
  const std::size_t per_iter = cfg.n_steps * envs.size();
  const std::size_t iterations = std::max<std::size_t>(1, (cfg.total_steps + per_iter - 1) / per_iter);
  TrainResult result;
  std::vector<double> last_good = flatten(blocks);
  std::size_t consecutive_aborts = 0;
  double decayed = cfg.learning_rate;
  double last_mean = std::nan("");

  if (opts.metrics != nullptr) *opts.metrics << metrics_header() << '\n';
  for (std::size_t it = 0; it < iterations; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    auto buf = collect_rollouts(policy, envs, cfg.n_steps, opts.rollout);
    for (double r : buf.rewards) {
      if (!std::isfinite(r)) {
        assign(blocks, last_good);
        throw TrainingError("training diverged at iteration " + std::to_string(it) + ": non-finite reward");
      }
    }
    compute_gae(buf, cfg.gamma, cfg.gae_lambda, true);
    const double progress = static_cast<double>(it) / static_cast<double>(iterations);
    const double lr = decayed * (1.0 - (1.0 - cfg.lr_end_fraction) * progress);
    optim.config.learning_rate = lr;
    const PpoStats stats = ppo_update(policy, optim, buf, cfg, update_rng);
    if (stats.aborted) {
      ++result.aborted_updates;
      if (++consecutive_aborts >= 3) {
        assign(blocks, last_good);
        throw TrainingError("training diverged at iteration " + std::to_string(it) + ": non-finite loss");
      }
    } else {
      consecutive_aborts = 0;
      last_good = flatten(blocks);
      if (shadow != nullptr) {
        ema_update(ema, last_good);
        assign(shadow->parameter_blocks(), ema.params);
      }
    }

    IterationMetrics m;
    m.iteration = it;
    result.steps += buf.size();
    m.steps = result.steps;
    if (!buf.episode_returns.empty()) {
      double s = 0.0;
      for (double r : buf.episode_returns) s += r;
      last_mean = s / static_cast<double>(buf.episode_returns.size());
    }
    m.mean_episode_reward = last_mean;
    m.episodes = buf.episode_returns.size();
    m.learning_rate = lr;
    m.ppo = stats;
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (opts.metrics != nullptr) *opts.metrics << metrics_row(m) << '\n' << std::flush;
    if (opts.on_iteration) opts.on_iteration(m);
    result.history.push_back(m);
    decayed *= cfg.lr_decay;
  }
  return result;
}

}  // namespace aed
