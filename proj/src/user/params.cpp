#include "aed/user/params.hpp"

#include <cmath>
#include <stdexcept>

namespace aed {
namespace {

constexpr std::array<std::string_view, kNumParams> kNames{"rho_ocular", "rho_spatial", "rho_w",      "rho_b", "sigma_w",
                                                         "theta_a",    "theta_b",     "theta_pref", "r_max"};

}  // namespace

Study study_from_int(int s) {
  if (s < 1 || s > 3) throw std::invalid_argument("study must be 1, 2 or 3 (got " + std::to_string(s) + ")");
  return static_cast<Study>(s);
}

std::string_view param_name(ParamId id) { return kNames.at(static_cast<std::size_t>(id)); }

ParamId param_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == name) return static_cast<ParamId>(i);
  throw std::invalid_argument("unknown user parameter '" + std::string(name) + "'");
}

double& UserParams::operator[](ParamId id) {
  switch (id) {
    case ParamId::RhoOcular: return rho_ocular;
    case ParamId::RhoSpatial: return rho_spatial;
    case ParamId::RhoW: return rho_w;
    case ParamId::RhoB: return rho_b;
    case ParamId::SigmaW: return sigma_w;
    case ParamId::ThetaA: return theta_a;
    case ParamId::ThetaB: return theta_b;
    case ParamId::ThetaPref: return theta_pref;
    case ParamId::RMax: return r_max;
  }
  throw std::invalid_argument("bad ParamId");
}

double UserParams::operator[](ParamId id) const { return const_cast<UserParams&>(*this)[id]; }

std::array<double, kNumParams> UserParams::to_array() const {
  std::array<double, kNumParams> a{};
  for (std::size_t i = 0; i < kNumParams; ++i) a[i] = (*this)[static_cast<ParamId>(i)];
  return a;
}

UserParams UserParams::from_array(const std::array<double, kNumParams>& a) {
  UserParams p;
  for (std::size_t i = 0; i < kNumParams; ++i) p[static_cast<ParamId>(i)] = a[i];
  return p;
}

Prior default_prior(Study study, double study1_spatial) {
  Prior p;
  const UserParams fixed;
  for (std::size_t i = 0; i < kNumParams; ++i) {
    const double v = fixed[static_cast<ParamId>(i)];
    p.ranges[i] = {v, v};
  }
  p[ParamId::RhoOcular] = {0.05, 0.4};
  switch (study) {
    case Study::One:
      p[ParamId::RhoSpatial] = {study1_spatial, study1_spatial};
      p[ParamId::ThetaB] = {0.1, 0.1};
      break;
    case Study::Two:
      p[ParamId::RhoSpatial] = {0.05, 0.3};
      p[ParamId::ThetaB] = {0.02, 0.12};
      break;
    case Study::Three:
      p[ParamId::RhoSpatial] = {0.05, 0.3};
      p[ParamId::ThetaB] = {0.02, 0.12};
      p[ParamId::ThetaPref] = {0.0, 1.0};
      break;
  }
  return p;
}

std::vector<ParamId> estimation_mask(Study study) {
  switch (study) {
    case Study::One: return {ParamId::RhoOcular};
    case Study::Two: return {ParamId::RhoOcular, ParamId::RhoSpatial, ParamId::ThetaB};
    case Study::Three: return {ParamId::RhoOcular, ParamId::RhoSpatial, ParamId::ThetaB, ParamId::ThetaPref};
  }
  throw std::invalid_argument("bad study");
}

void validate(const Prior& prior) {
  for (std::size_t i = 0; i < kNumParams; ++i) {
    const auto& r = prior.ranges[i];
    const std::string name(kNames[i]);
    if (!std::isfinite(r.lo) || !std::isfinite(r.hi)) throw std::invalid_argument("prior." + name + ": non-finite bound");
    if (r.lo > r.hi) throw std::invalid_argument("prior." + name + ": inverted range");
  }
  auto nonneg = [&](ParamId id) {
    if (prior[id].lo < 0.0) throw std::invalid_argument("prior." + std::string(param_name(id)) + ": must be >= 0");
  };
  for (auto id : {ParamId::RhoOcular, ParamId::RhoSpatial, ParamId::RhoW, ParamId::RhoB, ParamId::SigmaW,
                  ParamId::ThetaA, ParamId::ThetaB, ParamId::RMax})
    nonneg(id);
  if (prior[ParamId::ThetaPref].lo < 0.0 || prior[ParamId::ThetaPref].hi > 1.0) {
    throw std::invalid_argument("prior.theta_pref: must lie within [0, 1]");
  }
}

UserParams sample_user_params(const Prior& prior, Rng& rng, Study study) {
  validate(prior);
  UserParams p;
  for (std::size_t i = 0; i < kNumParams; ++i) {
    const auto& r = prior.ranges[i];
    p[static_cast<ParamId>(i)] = 0.5 * (r.lo + r.hi);
  }
  for (ParamId id : estimation_mask(study)) {
    const auto& r = prior[id];
    p[id] = r.lo == r.hi ? r.lo : uniform(rng, r.lo, r.hi);
  }
  return p;
}

double normalise(const Prior& prior, ParamId id, double value) {
  const auto& r = prior[id];
  return r.width() > 0.0 ? (value - r.lo) / r.width() : 0.0;
}

double denormalise(const Prior& prior, ParamId id, double unit) {
  const auto& r = prior[id];
  return r.lo + unit * r.width();
}

std::vector<double> normalise(const Prior& prior, std::span<const ParamId> mask, const UserParams& p) {
  std::vector<double> out;
  out.reserve(mask.size());
  for (ParamId id : mask) out.push_back(normalise(prior, id, p[id]));
  return out;
}

nlohmann::json to_json(const Prior& prior) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < kNumParams; ++i) j[std::string(kNames[i])] = {prior.ranges[i].lo, prior.ranges[i].hi};
  return j;
}

Prior prior_from_json(const nlohmann::json& j, const Prior& base) {
  if (!j.is_object()) throw std::invalid_argument("prior: expected an object");
  Prior p = base;
  for (const auto& [key, val] : j.items()) {
    const ParamId id = param_from_name(key);
    if (!val.is_array() || val.size() != 2) throw std::invalid_argument("prior." + key + ": expected [lo, hi]");
    p[id] = {val[0].get<double>(), val[1].get<double>()};
  }
  validate(p);
  return p;
}

nlohmann::json to_json(const UserParams& p) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < kNumParams; ++i) j[std::string(kNames[i])] = p[static_cast<ParamId>(i)];
  return j;
}

UserParams params_from_json(const nlohmann::json& j) {
  UserParams p;
  for (const auto& [key, val] : j.items()) p[param_from_name(key)] = val.get<double>();
  return p;
}

}  // namespace aed
