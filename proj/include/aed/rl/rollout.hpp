#pragma once

#include <concepts>
#include <cstdint>
#include <exception>
#include <iostream>
#include <vector>

#include <omp.h>

#include "aed/rl/policy.hpp"

namespace aed {

template <class Obs>
struct StepResult {
  Obs observation;  // terminal observation when done
  double reward = 0.0;
  bool done = false;
};

/// An environment owns its RNG stream. `supervision_target` returns the
/// privileged regression target for the current episode (empty when the task
/// has none).
template <class E>
concept Environment = requires(E& env, const Vector& action) {
  typename E::Observation;
  { env.reset() } -> std::same_as<typename E::Observation>;
  { env.step(action) } -> std::same_as<StepResult<typename E::Observation>>;
  { env.supervision_target() } -> std::convertible_to<Vector>;
};

template <class Obs>
struct RolloutBuffer {
  std::size_t n_steps = 0;
  std::size_t n_envs = 0;
  // Row i = t * n_envs + e.
  std::vector<Obs> observations;
  std::vector<Vector> actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<std::uint8_t> dones;
  std::vector<Vector> targets;  // empty vectors when the task has no targets
  std::vector<double> last_values;  // bootstrap value per env after the last step
  std::vector<double> advantages;   // filled by compute_gae
  std::vector<double> returns;
  bool finalised = false;

  // Terminal observations of finished episodes with their targets; the
  // estimate of a full memory is never an input to a PPO step.
  std::vector<std::pair<Obs, Vector>> supervision;

  std::vector<double> episode_returns;  // completed episodes
  std::vector<std::size_t> episode_lengths;
  std::size_t faults = 0;

  std::size_t size() const { return rewards.size(); }
  std::size_t index(std::size_t t, std::size_t e) const { return t * n_envs + e; }
};

template <Environment Env>
class VecEnv {
 public:
  using Obs = typename Env::Observation;

  struct Slot {
    Env env;
    Rng action_rng;
    Obs obs;
    double episode_return = 0.0;
    std::size_t episode_length = 0;
  };

  VecEnv(std::vector<Env> envs, std::uint64_t seed) {
    for (std::size_t i = 0; i < envs.size(); ++i) {
      Slot s{std::move(envs[i]), Rng(derive_seed(seed, 0xAC7100 + i)), {}, 0.0, 0};
      s.obs = s.env.reset();
      slots_.push_back(std::move(s));
    }
  }

  std::size_t size() const { return slots_.size(); }
  Slot& slot(std::size_t i) { return slots_[i]; }
  const Slot& slot(std::size_t i) const { return slots_[i]; }
  std::vector<Slot>& slots() { return slots_; }

 private:
  std::vector<Slot> slots_;
};

struct RolloutOptions {
  int workers = 1;  // 1 selects the serial reference path
  SampleMode mode = SampleMode::Stochastic;
};

namespace detail {

template <class Env, class Obs>
void step_slot(typename VecEnv<Env>::Slot& s, const ActOutput& a, RolloutBuffer<Obs>& buf, std::size_t row,
               std::vector<std::pair<Obs, Vector>>& terminal, std::vector<std::pair<double, std::size_t>>& finished) {
  buf.targets[row] = s.env.supervision_target();
  StepResult<Obs> r;
  bool fault = false;
  try {
    r = s.env.step(a.action);
  } catch (const std::exception& e) {
    fault = true;
#pragma omp critical(aed_rollout_log)
    std::cerr << "rollout: environment step failed, truncating episode: " << e.what() << "\n";
  }
  if (fault) {
    r.reward = 0.0;
    r.done = true;
    r.observation = s.obs;
  }
  buf.rewards[row] = r.reward;
  buf.dones[row] = r.done ? 1 : 0;
  s.episode_return += r.reward;
  ++s.episode_length;
  if (r.done) {
    if (buf.targets[row].size() > 0 && !fault) terminal.emplace_back(std::move(r.observation), buf.targets[row]);
    finished.emplace_back(s.episode_return, s.episode_length);
    s.episode_return = 0.0;
    s.episode_length = 0;
    s.obs = s.env.reset();
  } else {
    s.obs = std::move(r.observation);
  }
  if (fault) {
#pragma omp atomic
    ++buf.faults;
  }
}

}  // namespace detail

/// Runs the frozen policy for `n_steps` on every environment. Policy
/// evaluation is batched across environments; environment stepping is
/// fanned out over OpenMP threads when `opts.workers > 1`. Each environment
/// and its action-sampling stream are independent, so the buffer is identical
/// for any worker count.
template <ActorCritic P, Environment Env>
  requires std::same_as<typename P::Observation, typename Env::Observation>
RolloutBuffer<typename Env::Observation> collect_rollouts(const P& policy, VecEnv<Env>& envs, std::size_t n_steps,
                                                          const RolloutOptions& opts = {}) {
  using Obs = typename Env::Observation;
  const std::size_t n_envs = envs.size();
  RolloutBuffer<Obs> buf;
  buf.n_steps = n_steps;
  buf.n_envs = n_envs;
  const std::size_t total = n_steps * n_envs;
  buf.observations.reserve(total);
  buf.actions.resize(total);
  buf.log_probs.resize(total);
  buf.values.resize(total);
  buf.rewards.resize(total);
  buf.dones.resize(total);
  buf.targets.resize(total);

  std::vector<const Obs*> obs_ptrs(n_envs);
  std::vector<Rng*> rngs(n_envs);
  std::vector<std::vector<std::pair<Obs, Vector>>> terminal(n_envs);
  std::vector<std::vector<std::pair<double, std::size_t>>> finished(n_envs);

  for (std::size_t t = 0; t < n_steps; ++t) {
    for (std::size_t e = 0; e < n_envs; ++e) {
      obs_ptrs[e] = &envs.slot(e).obs;
      rngs[e] = &envs.slot(e).action_rng;
    }
    const auto acts = act_batch(policy, std::span<const Obs* const>(obs_ptrs), std::span<Rng* const>(rngs), opts.mode);
    for (std::size_t e = 0; e < n_envs; ++e) {
      const std::size_t row = buf.index(t, e);
      buf.observations.push_back(envs.slot(e).obs);
      buf.actions[row] = acts[e].action;
      buf.log_probs[row] = acts[e].log_prob;
      buf.values[row] = acts[e].value;
    }
    if (opts.workers > 1) {
#pragma omp parallel for num_threads(opts.workers) schedule(dynamic, 1)
      for (std::ptrdiff_t e = 0; e < static_cast<std::ptrdiff_t>(n_envs); ++e) {
        const auto ue = static_cast<std::size_t>(e);
        detail::step_slot<Env, Obs>(envs.slot(ue), acts[ue], buf, buf.index(t, ue), terminal[ue], finished[ue]);
      }
    } else {
      for (std::size_t e = 0; e < n_envs; ++e) {
        detail::step_slot<Env, Obs>(envs.slot(e), acts[e], buf, buf.index(t, e), terminal[e], finished[e]);
      }
    }
  }

  for (std::size_t e = 0; e < n_envs; ++e) obs_ptrs[e] = &envs.slot(e).obs;
  const auto last = policy.forward_batch(std::span<const Obs* const>(obs_ptrs));
  buf.last_values.assign(last.out.value.data(), last.out.value.data() + last.out.value.size());

  // Merge per-env lists in env order so the buffer does not depend on scheduling.
  for (std::size_t e = 0; e < n_envs; ++e) {
    for (auto& item : terminal[e]) buf.supervision.push_back(std::move(item));
    for (const auto& [ret, len] : finished[e]) {
      buf.episode_returns.push_back(ret);
      buf.episode_lengths.push_back(len);
    }
  }
  return buf;
}

}  // namespace aed
