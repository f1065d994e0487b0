#include "aed/rl/gae.hpp"

#include <cmath>
#include <stdexcept>

namespace aed {

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const std::uint8_t> dones, std::span<const double> last_values, std::size_t n_steps,
                      std::size_t n_envs, double gamma, double lambda) {
  const std::size_t n = n_steps * n_envs;
  if (rewards.size() != n || values.size() != n || dones.size() != n || last_values.size() != n_envs) {
    throw std::invalid_argument("compute_gae: buffer arrays do not match n_steps x n_envs");
  }
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  for (std::size_t e = 0; e < n_envs; ++e) {
    double next_value = last_values[e];
    double next_adv = 0.0;
    for (std::size_t t = n_steps; t-- > 0;) {
      const std::size_t i = t * n_envs + e;
      const double live = dones[i] ? 0.0 : 1.0;
      const double delta = rewards[i] + gamma * next_value * live - values[i];
      next_adv = delta + gamma * lambda * live * next_adv;
      out.advantages[i] = next_adv;
      out.returns[i] = next_adv + values[i];
      next_value = values[i];
    }
  }
  return out;
}

void normalize_advantages(std::span<double> adv) {
  if (adv.empty()) return;
  double mean = 0.0;
  for (double a : adv) mean += a;
  mean /= static_cast<double>(adv.size());
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  var /= static_cast<double>(adv.size());
  const double sd = std::sqrt(var);
  for (double& a : adv) a = sd > 1e-12 ? (a - mean) / sd : 0.0;
}

}  // namespace aed
