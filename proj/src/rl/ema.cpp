#include "aed/rl/ema.hpp"

#include <stdexcept>

#include "aed/rl/policy.hpp"

namespace aed {

EmaShadow make_ema(std::span<const ParameterBlock> blocks, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("ema: alpha must lie in [0, 1]");
  return {flatten(blocks), alpha};
}

void ema_update(EmaShadow& shadow, std::span<const double> params) {
  if (params.size() != shadow.params.size()) throw std::invalid_argument("ema_update: shape mismatch");
  const double a = shadow.alpha;
  for (std::size_t i = 0; i < params.size(); ++i) shadow.params[i] = a * shadow.params[i] + (1.0 - a) * params[i];
}

}  // namespace aed
