#pragma once

#include <span>

#include "aed/analyst/task.hpp"
#include "aed/numerics/linalg.hpp"

namespace aed {

/// 1-D Gaussian-process design task: place `probes` noisy evaluations of a
/// function drawn from a squared-exponential GP on [0, 1].
struct GpConfig {
  double lengthscale = 0.25;
  double variance = 1.0;  // σ_f²
  double noise = 1e-4;    // σ_n²
  std::size_t grid_intervals = 64;
  std::size_t probes = 2;
};

void validate(const GpConfig& cfg);
nlohmann::json to_json(const GpConfig& cfg);
GpConfig gp_config_from_json(const nlohmann::json& j, const GpConfig& base);

/// Design grid: grid_intervals + 1 equally spaced points on [0, 1].
std::vector<double> gp_grid(const GpConfig& cfg);
double gp_kernel(const GpConfig& cfg, double a, double b);

/// Multivariate-normal draw on the grid via a Cholesky factor of the kernel
/// matrix; the jitter escalates from 1e-12 to 1e-6 (relative to σ_f²) before
/// giving up with std::runtime_error.
Vector gp_sample(const GpConfig& cfg, Rng& rng);

struct GpPosterior {
  Vector mean;
  Vector variance;
};

/// Standard GP regression posterior on the grid.
GpPosterior gp_posterior(const GpConfig& cfg, std::span<const double> xs, std::span<const double> ys);
/// Posterior variance only; it does not depend on the observed values.
Vector gp_posterior_variance(const GpConfig& cfg, std::span<const double> xs);

/// Trapezoidal integral over [0, 1] of values on an equally spaced grid.
double imse(std::span<const double> values_on_grid);
double imse(const Vector& values_on_grid);

/// Grid argmin of the post-probe IMSE; ties go to the lowest x.
double myopic_next_design(const GpConfig& cfg, std::span<const double> observed);
/// Greedy sequence of cfg.probes designs.
std::vector<double> myopic_designs(const GpConfig& cfg);
/// Exhaustive search over grid pairs for the best two-probe IMSE.
double optimal_pair_imse(const GpConfig& cfg);

/// Record layout (pooled, width 3): x, y, observed.
class GpTask final : public ExperimentTask {
 public:
  explicit GpTask(const GpConfig& cfg);

  std::string name() const override { return "gp-nonmyopic"; }
  std::size_t design_dim() const override { return 1; }
  Range design_range(std::size_t) const override { return {0.0, 1.0}; }
  std::size_t estimate_dim() const override { return 0; }
  RecordLayout layout() const override { return {3, 0}; }

  Vector sample_latent(Rng& rng) const override;
  Vector target(const Vector&) const override { return {}; }
  EncodedRecord run(const Vector& latent, const Vector& design, Rng& rng,
                    nlohmann::json* outcome = nullptr) const override;
  EncodedRecord encode(const Vector& design, const nlohmann::json& outcome) const override;
  EncodedRecord mask(const EncodedRecord& record) const override;
  /// Negative L2 discrepancy between the function and the posterior mean
  /// given the probes so far (the estimate argument is unused).
  double reward(const Vector& latent, const Vector& estimate, std::span<const RecordPtr> records) const override;
  nlohmann::json describe() const override;

  const GpConfig& config() const { return cfg_; }
  /// Nearest grid point.
  double snap(double x) const;
  /// Squared L2 distance between two functions on the grid.
  double l2(const Vector& f, const Vector& g) const;

 private:
  GpConfig cfg_;
  Matrix chol_;
};

}  // namespace aed
