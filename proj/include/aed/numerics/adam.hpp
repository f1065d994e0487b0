#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace aed {

/// A view of one contiguous parameter array and its gradient accumulator.
struct ParameterBlock {
  std::span<double> value;
  std::span<double> grad;
};

struct AdamConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double max_grad_norm = std::numeric_limits<double>::infinity();
};

struct OptimState {
  AdamConfig config;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;
};

struct AdamReport {
  bool applied = false;
  double grad_norm = 0.0;
  double clip_scale = 1.0;
};

OptimState make_optim_state(std::span<const ParameterBlock> blocks, const AdamConfig& config);

double global_grad_norm(std::span<const ParameterBlock> blocks);

/// Scales every gradient so the global L2 norm is at most `max_norm`. Returns the scale used.
double clip_grad_norm(std::span<const ParameterBlock> blocks, double max_norm);

/// Bias-corrected Adam step with global-norm clipping. A non-finite gradient
/// leaves parameters and moments untouched and reports `applied = false`.
AdamReport adam_step(std::span<const ParameterBlock> blocks, OptimState& state);

}  // namespace aed
