#pragma once

#include "aed/analyst/task.hpp"

namespace aed {

/// Bernoulli trials with P(y = 1 | θ, d) = 1 / (1 + exp(-(d + θ))).
struct LogisticConfig {
  Range theta{-8.0, 8.0};
  Range design{-10.0, 10.0};
  std::size_t trials = 10;
};

void validate(const LogisticConfig& cfg);
nlohmann::json to_json(const LogisticConfig& cfg);
LogisticConfig logistic_config_from_json(const nlohmann::json& j, const LogisticConfig& base);

double logistic_probability(double theta, double d);
/// One draw: 1 with logistic_probability(theta, d), else 0.
int logistic_trial(double theta, double d, Rng& rng);

/// Record layout (pooled, width 3): d / design half-width, y, observed.
/// The estimate is θ normalised onto the prior range; the reward is its
/// negative squared error.
class LogisticTask final : public ExperimentTask {
 public:
  explicit LogisticTask(const LogisticConfig& cfg);

  std::string name() const override { return "logistic-adaptivity"; }
  std::size_t design_dim() const override { return 1; }
  Range design_range(std::size_t) const override { return cfg_.design; }
  std::size_t estimate_dim() const override { return 1; }
  RecordLayout layout() const override { return {3, 0}; }

  Vector sample_latent(Rng& rng) const override;
  Vector target(const Vector& latent) const override;
  EncodedRecord run(const Vector& latent, const Vector& design, Rng& rng,
                    nlohmann::json* outcome = nullptr) const override;
  EncodedRecord encode(const Vector& design, const nlohmann::json& outcome) const override;
  EncodedRecord mask(const EncodedRecord& record) const override;
  double reward(const Vector& latent, const Vector& estimate, std::span<const RecordPtr> records) const override;
  Vector denormalise(const Vector& estimate) const override;
  nlohmann::json describe() const override;

  const LogisticConfig& config() const { return cfg_; }

 private:
  EncodedRecord make(double d, int y) const;
  double scale() const;
  LogisticConfig cfg_;
};

}  // namespace aed
