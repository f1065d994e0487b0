#include "aed/demos/logistic.hpp"

#include <cmath>

namespace aed {

void validate(const LogisticConfig& c) {
  if (!std::isfinite(c.theta.lo) || !std::isfinite(c.theta.hi) || c.theta.lo > c.theta.hi) {
    throw std::invalid_argument("logistic.theta: need finite lo <= hi");
  }
  if (!std::isfinite(c.design.lo) || !std::isfinite(c.design.hi) || !(c.design.lo < c.design.hi)) {
    throw std::invalid_argument("logistic.design: need finite lo < hi");
  }
  if (c.trials == 0) throw std::invalid_argument("logistic.trials: must be positive");
}

nlohmann::json to_json(const LogisticConfig& c) {
  return {{"theta", {c.theta.lo, c.theta.hi}}, {"design", {c.design.lo, c.design.hi}}, {"trials", c.trials}};
}

LogisticConfig logistic_config_from_json(const nlohmann::json& j, const LogisticConfig& base) {
  LogisticConfig c = base;
  auto range = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_array() || v.size() != 2) throw std::invalid_argument("logistic." + key + ": expected [lo, hi]");
    return Range{v[0].get<double>(), v[1].get<double>()};
  };
  for (const auto& [k, v] : j.items()) {
    if (k == "theta") c.theta = range(v, k);
    else if (k == "design") c.design = range(v, k);
    else if (k == "trials") c.trials = v.get<std::size_t>();
    else throw std::invalid_argument("logistic: unknown key '" + k + "'");
  }
  validate(c);
  return c;
}

double logistic_probability(double theta, double d) { return 1.0 / (1.0 + std::exp(-(d + theta))); }

int logistic_trial(double theta, double d, Rng& rng) {
  if (!std::isfinite(theta) || !std::isfinite(d)) throw std::invalid_argument("logistic_trial: non-finite input");
  return uniform(rng, 0.0, 1.0) < logistic_probability(theta, d) ? 1 : 0;
}

LogisticTask::LogisticTask(const LogisticConfig& cfg) : cfg_(cfg) { validate(cfg_); }

double LogisticTask::scale() const { return std::max(std::abs(cfg_.design.lo), std::abs(cfg_.design.hi)); }

EncodedRecord LogisticTask::make(double d, int y) const {
  EncodedRecord r;
  r.flat = Vector{{d / scale(), static_cast<double>(y), 1.0}};
  return r;
}

Vector LogisticTask::sample_latent(Rng& rng) const {
  if (cfg_.theta.width() == 0.0) return Vector::Constant(1, cfg_.theta.lo);
  return Vector::Constant(1, uniform(rng, cfg_.theta.lo, cfg_.theta.hi));
}

Vector LogisticTask::target(const Vector& latent) const {
  if (cfg_.theta.width() == 0.0) return Vector::Constant(1, 0.5);
  return Vector::Constant(1, (latent[0] - cfg_.theta.lo) / cfg_.theta.width());
}

Vector LogisticTask::denormalise(const Vector& estimate) const {
  if (estimate.size() != 1) throw std::invalid_argument("logistic estimate must have one entry");
  return Vector::Constant(1, cfg_.theta.lo + cfg_.theta.width() * estimate[0]);
}

EncodedRecord LogisticTask::run(const Vector& latent, const Vector& design, Rng& rng, nlohmann::json* outcome) const {
  const int y = logistic_trial(latent[0], design[0], rng);
  if (outcome != nullptr) *outcome = {{"y", y}};
  return make(design[0], y);
}

EncodedRecord LogisticTask::encode(const Vector& design, const nlohmann::json& outcome) const {
  const int y = outcome.at("y").get<int>();
  if (y != 0 && y != 1) throw std::invalid_argument("logistic outcome y must be 0 or 1");
  return make(design[0], y);
}

EncodedRecord LogisticTask::mask(const EncodedRecord& record) const {
  EncodedRecord m;
  m.flat = Vector{{record.flat[0], 0.0, 0.0}};
  return m;
}

double LogisticTask::reward(const Vector& latent, const Vector& estimate, std::span<const RecordPtr>) const {
  const double e = target(latent)[0] - estimate[0];
  return -e * e;
}

nlohmann::json LogisticTask::describe() const { return {{"task", name()}, {"logistic", to_json(cfg_)}}; }

}  // namespace aed
