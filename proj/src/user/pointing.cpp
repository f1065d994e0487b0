#include "aed/user/pointing.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace aed {
namespace {

double clip1(double v) { return std::clamp(v, -1.0, 1.0); }

}  // namespace

bool DesignSpace::contains(const Design& d) const {
  return d.distance >= distance.lo && d.distance <= distance.hi && d.width >= width.lo && d.width <= width.hi;
}

Design DesignSpace::clip(const Design& d) const {
  return {std::clamp(d.distance, distance.lo, distance.hi), std::clamp(d.width, width.lo, width.hi)};
}

Design DesignSpace::sample(Rng& rng) const {
  Design d;
  d.distance = uniform(rng, distance.lo, distance.hi);
  d.width = uniform(rng, width.lo, width.hi);
  return d;
}

PointingState reset_at(const Design& design, double angle) {
  if (!(design.distance >= 0.0 && design.distance <= 1.0)) {
    throw std::invalid_argument("reset: design distance " + std::to_string(design.distance) + " outside [0, 1]");
  }
  if (!(design.width > 0.0 && design.width <= 1.0)) {
    throw std::invalid_argument("reset: design width " + std::to_string(design.width) + " outside (0, 1]");
  }
  PointingState s;
  s.tx = clip1(design.distance * std::cos(angle));
  s.ty = clip1(design.distance * std::sin(angle));
  s.w = design.width;
  return s;
}

PointingState reset(const Design& design, const UserParams&, Rng& rng) {
  const double angle = uniform(rng, -std::numbers::pi, std::numbers::pi);
  return reset_at(design, angle);
}

double eccentricity(const PointingState& s) { return std::hypot(s.tx - s.fx, s.ty - s.fy); }

bool inside_target(const PointingState& s) { return eccentricity(s) <= 0.5 * s.w; }

double perceptual_sigma(const PointingConfig& cfg, const UserParams& p, double ecc, double w) {
  return std::max(cfg.sigma_floor, p.rho_spatial * ecc - p.rho_w * w + p.rho_b);
}

double detection_prob(const PointingConfig& cfg, const PointingState& s) {
  const double z = cfg.kappa0 + cfg.kappa_w * s.w - cfg.kappa_e * eccentricity(s);
  return 1.0 / (1.0 + std::exp(-z));
}

StepOutcome step(const PointingConfig& cfg, PointingState& s, const Intent& intent, const UserParams& p, Rng& rng) {
  if (s.terminated) throw StepError("step: episode already terminated");
  StepOutcome out;
  ++s.step;
  if (intent.keypress && cfg.study == Study::Three) {
    out.keypress = true;
    out.success = inside_target(s);
    out.reward = (out.success ? 1.0 : -1.0) * p.r_max * p.theta_pref;
    out.obs.aim_x = s.fx;
    out.obs.aim_y = s.fy;
    out.done = true;
    s.terminated = true;
    return out;
  }

  const double ax = clip1(intent.aim_x), ay = clip1(intent.aim_y);
  const double sd = p.rho_ocular * std::hypot(ax - s.fx, ay - s.fy);
  const double nx = clip1(ax + sd * standard_normal(rng));
  const double ny = clip1(ay + sd * standard_normal(rng));
  out.amplitude = std::hypot(nx - s.fx, ny - s.fy);
  s.fx = nx;
  s.fy = ny;
  out.duration = p.theta_a * out.amplitude + p.theta_b;
  out.reward = -out.duration;

  out.obs.aim_x = ax;
  out.obs.aim_y = ay;
  const double ecc = eccentricity(s);
  out.obs.detected = cfg.study == Study::One || uniform(rng, 0.0, 1.0) < detection_prob(cfg, s);
  if (out.obs.detected) {
    const double so = perceptual_sigma(cfg, p, ecc, s.w);
    const double sw = std::max(cfg.sigma_floor, p.sigma_w);
    out.obs.x = s.tx + so * standard_normal(rng);
    out.obs.y = s.ty + so * standard_normal(rng);
    out.obs.w = s.w + sw * standard_normal(rng);
    out.obs.variance = {so * so, so * so, sw * sw};
  }

  if (cfg.study != Study::Three && inside_target(s)) {
    out.success = true;
    out.done = true;
  }
  if (!out.done && s.step >= cfg.max_steps) {
    out.reward += cfg.termination_penalty;
    out.done = true;
  }
  s.terminated = out.done;
  return out;
}

Belief belief_update(const Belief& b, const PointingObservation& obs) {
  if (!obs.detected) return b;
  for (double v : obs.variance) {
    if (!(v > 0.0)) throw std::invalid_argument("belief_update: observation variance must be positive");
  }
  const std::array<double, 3> o{obs.x, obs.y, obs.w};
  Belief out = b;
  if (!b.detected) {
    out.mean = o;
    out.var = obs.variance;
    out.detected = true;
    return out;
  }
  for (std::size_t k = 0; k < 3; ++k) {
    const double gain = b.var[k] / (b.var[k] + obs.variance[k]);
    out.mean[k] = b.mean[k] + gain * (o[k] - b.mean[k]);
    out.var[k] = b.var[k] - gain * b.var[k];
  }
  return out;
}

std::vector<double> controller_input(const Belief& b, const PointingState& s, const UserParams& p,
                                     const PointingConfig& cfg) {
  std::vector<double> x(kControllerInputDim, 0.0);
  x[0] = s.fx;
  x[1] = s.fy;
  if (b.detected) {
    x[2] = b.mean[0] - s.fx;
    x[3] = b.mean[1] - s.fy;
    for (std::size_t k = 0; k < 3; ++k) {
      x[4 + k] = b.mean[k];
      x[7 + k] = std::sqrt(b.var[k]);
    }
  } else {
    x[7] = x[8] = x[9] = kEmptyBeliefStd;
  }
  x[10] = b.detected ? 1.0 : 0.0;
  x[11] = static_cast<double>(s.step) / static_cast<double>(cfg.max_steps);
  x[12] = p.rho_ocular;
  x[13] = p.rho_spatial;
  x[14] = 10.0 * p.theta_b;
  x[15] = p.theta_pref;
  return x;
}

std::size_t controller_action_dim(Study study) { return study == Study::Three ? 3 : 2; }

Intent intent_from_action(std::span<const double> u, const PointingState& s, const Belief& b, Study study) {
  if (u.size() < 2) throw std::invalid_argument("intent_from_action: action needs at least 2 components");
  const double u0 = clip1(u[0]), u1 = clip1(u[1]);
  Intent in;
  if (b.detected) {
    const double vx = b.mean[0] - s.fx, vy = b.mean[1] - s.fy;
    const double g = 1.0 + 0.5 * u0;
    in.aim_x = s.fx + g * vx - 0.5 * u1 * vy;
    in.aim_y = s.fy + g * vy + 0.5 * u1 * vx;
  } else {
    in.aim_x = s.fx + 0.5 * u0;
    in.aim_y = s.fy + 0.5 * u1;
  }
  in.aim_x = clip1(in.aim_x);
  in.aim_y = clip1(in.aim_y);
  in.keypress = study == Study::Three && u.size() > 2 && u[2] > 0.0;
  return in;
}

nlohmann::json to_json(const EpisodeTrace& t, const std::string& params_id) {
  nlohmann::json j;
  j["design"] = {{"distance", t.design.distance}, {"angle", t.angle}, {"width", t.design.width}};
  j["target"] = {t.target_x, t.target_y};
  j["params_id"] = params_id;
  j["fixations"] = nlohmann::json::array();
  for (const auto& f : t.fixations) j["fixations"].push_back({f[0], f[1]});
  j["durations"] = t.durations;
  j["detected"] = nlohmann::json::array();
  for (auto d : t.detected) j["detected"].push_back(d != 0);
  j["keypress_step"] = t.keypress_step ? nlohmann::json(*t.keypress_step) : nlohmann::json(nullptr);
  j["total_time"] = t.total_time;
  j["total_reward"] = t.total_reward;
  j["success"] = t.success;
  j["truncated"] = t.truncated;
  j["steps"] = t.steps;
  return j;
}

EpisodeTrace trace_from_json(const nlohmann::json& j) {
  EpisodeTrace t;
  t.design.distance = j.at("design").at("distance").get<double>();
  t.design.width = j.at("design").at("width").get<double>();
  t.angle = j.at("design").value("angle", 0.0);
  t.target_x = j.at("target").at(0).get<double>();
  t.target_y = j.at("target").at(1).get<double>();
  for (const auto& f : j.at("fixations")) t.fixations.push_back({f.at(0).get<double>(), f.at(1).get<double>()});
  if (j.contains("durations")) t.durations = j["durations"].get<std::vector<double>>();
  if (j.contains("detected"))
    for (const auto& d : j["detected"]) t.detected.push_back(d.get<bool>() ? 1 : 0);
  if (j.contains("keypress_step") && !j["keypress_step"].is_null()) t.keypress_step = j["keypress_step"].get<int>();
  t.total_time = j.value("total_time", 0.0);
  t.total_reward = j.value("total_reward", 0.0);
  t.success = j.value("success", false);
  t.truncated = j.value("truncated", false);
  t.steps = j.value("steps", static_cast<int>(t.fixations.size()));
  return t;
}

}  // namespace aed
