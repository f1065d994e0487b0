#pragma once

#include <span>
#include <vector>

#include "aed/numerics/adam.hpp"

namespace aed {

/// Slowly tracking copy of a policy's flat parameter vector.
struct EmaShadow {
  std::vector<double> params;
  double alpha = 0.99;
};

EmaShadow make_ema(std::span<const ParameterBlock> blocks, double alpha);

/// φ' ← α φ' + (1 − α) φ, elementwise.
void ema_update(EmaShadow& shadow, std::span<const double> params);

}  // namespace aed
