#include "aed/numerics/gaussian.hpp"

#include <numbers>
#include <stdexcept>

namespace aed {
namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2*pi)
}

Vector clamped_log_std(const Vector& log_std) { return log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax); }

double gaussian_log_prob(const Vector& mean, const Vector& log_std, const Vector& action) {
  if (mean.size() != log_std.size() || mean.size() != action.size()) {
    throw std::invalid_argument("gaussian_log_prob: dimension mismatch");
  }
  const Vector ls = clamped_log_std(log_std);
  double lp = 0.0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const double z = (action[i] - mean[i]) * std::exp(-ls[i]);
    lp += -0.5 * z * z - ls[i] - kHalfLog2Pi;
  }
  return lp;
}

double gaussian_entropy(const Vector& log_std) {
  const Vector ls = clamped_log_std(log_std);
  return static_cast<double>(ls.size()) * (0.5 + kHalfLog2Pi) + ls.sum();
}

GaussianSample gaussian_sample(const GaussianHead& head, Rng& rng, SampleMode mode) {
  if (!head.mean.allFinite() || !head.log_std.allFinite()) {
    throw std::invalid_argument("gaussian_sample: non-finite head");
  }
  GaussianSample out;
  out.action = head.mean;
  if (mode == SampleMode::Stochastic) {
    const Vector std = clamped_log_std(head.log_std).array().exp();
    for (Eigen::Index i = 0; i < out.action.size(); ++i) out.action[i] += std[i] * standard_normal(rng);
  }
  out.log_prob = gaussian_log_prob(head.mean, head.log_std, out.action);
  return out;
}

}  // namespace aed
