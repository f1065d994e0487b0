#include "aed/numerics/adam.hpp"

#include <cmath>
#include <stdexcept>

#include "aed/numerics/linalg.hpp"

namespace aed {

OptimState make_optim_state(std::span<const ParameterBlock> blocks, const AdamConfig& config) {
  OptimState state;
  state.config = config;
  for (const auto& b : blocks) {
    state.first_moment.emplace_back(b.value.size(), 0.0);
    state.second_moment.emplace_back(b.value.size(), 0.0);
  }
  return state;
}

double global_grad_norm(std::span<const ParameterBlock> blocks) {
  double sq = 0.0;
  for (const auto& b : blocks) {
    for (double g : b.grad) sq += g * g;
  }
  return std::sqrt(sq);
}

double clip_grad_norm(std::span<const ParameterBlock> blocks, double max_norm) {
  const double norm = global_grad_norm(blocks);
  if (!(norm > max_norm)) return 1.0;
  const double scale = max_norm / (norm + 1e-12);
  for (const auto& b : blocks) {
    for (double& g : b.grad) g *= scale;
  }
  return scale;
}

AdamReport adam_step(std::span<const ParameterBlock> blocks, OptimState& state) {
  if (blocks.size() != state.first_moment.size()) {
    throw std::invalid_argument("adam_step: optimiser state does not match parameter blocks");
  }
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].value.size() != state.first_moment[i].size() || blocks[i].grad.size() != blocks[i].value.size()) {
      throw std::invalid_argument("adam_step: parameter block shape changed");
    }
  }
  AdamReport report;
  report.grad_norm = global_grad_norm(blocks);
  if (!std::isfinite(report.grad_norm)) return report;

  report.clip_scale = clip_grad_norm(blocks, state.config.max_grad_norm);
  ++state.step;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  const double step_size = c.learning_rate / correction1;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    auto value = blocks[i].value;
    auto grad = blocks[i].grad;
    for (std::size_t k = 0; k < value.size(); ++k) {
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * grad[k];
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * grad[k] * grad[k];
      value[k] -= step_size * m[k] / (std::sqrt(v[k] / correction2) + c.epsilon);
    }
  }
  report.applied = true;
  return report;
}

}  // namespace aed
