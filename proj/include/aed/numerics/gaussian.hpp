#pragma once

#include "aed/numerics/linalg.hpp"
#include "aed/numerics/rng.hpp"

namespace aed {

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

enum class SampleMode { Stochastic, Deterministic };

/// Diagonal Gaussian over an action vector with a state-independent log std.
struct GaussianHead {
  Vector mean;
  Vector log_std;
};

struct GaussianSample {
  Vector action;
  double log_prob = 0.0;
};

Vector clamped_log_std(const Vector& log_std);

double gaussian_log_prob(const Vector& mean, const Vector& log_std, const Vector& action);

/// Entropy of the diagonal Gaussian.
double gaussian_entropy(const Vector& log_std);

/// Deterministic mode returns the mean together with the density at the mean.
GaussianSample gaussian_sample(const GaussianHead& head, Rng& rng, SampleMode mode = SampleMode::Stochastic);

}  // namespace aed
