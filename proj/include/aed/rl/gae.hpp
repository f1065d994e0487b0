#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aed/rl/rollout.hpp"

namespace aed {

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;  // advantages + values, before normalisation
};

/// GAE(λ) over a time-major (t * n_envs + e) layout. `last_values` bootstraps
/// episodes cut by the rollout horizon.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const std::uint8_t> dones, std::span<const double> last_values, std::size_t n_steps,
                      std::size_t n_envs, double gamma, double lambda);

/// In-place shift to mean 0 and scale to unit (population) std. Leaves a
/// single element at 0 and a constant batch at 0.
void normalize_advantages(std::span<double> adv);

template <class Obs>
void compute_gae(RolloutBuffer<Obs>& buf, double gamma, double lambda, bool normalize = true) {
  auto r = compute_gae(buf.rewards, buf.values, buf.dones, buf.last_values, buf.n_steps, buf.n_envs, gamma, lambda);
  buf.advantages = std::move(r.advantages);
  buf.returns = std::move(r.returns);
  if (normalize) normalize_advantages(buf.advantages);
  buf.finalised = true;
}

}  // namespace aed
