#include "aed/rl/ppo.hpp"

#include <cmath>
#include <stdexcept>

namespace aed {

void validate(const PpoConfig& c) {
  auto fail = [](const char* field, const char* why) {
    throw std::invalid_argument(std::string("ppo.") + field + ": " + why);
  };
  if (!(c.learning_rate >= 0.0)) fail("learning_rate", "must be >= 0");
  if (!(c.lr_decay > 0.0 && c.lr_decay <= 1.0)) fail("lr_decay", "must lie in (0, 1]");
  if (!(c.gamma >= 0.0 && c.gamma < 1.0)) fail("gamma", "must satisfy 0 <= gamma < 1");
  if (!(c.gae_lambda >= 0.0 && c.gae_lambda <= 1.0)) fail("gae_lambda", "must lie in [0, 1]");
  if (!(c.clip_range > 0.0 && c.clip_range < 1.0)) fail("clip_range", "must lie in (0, 1)");
  if (!(c.ent_coef >= 0.0)) fail("ent_coef", "must be >= 0");
  if (!(c.vf_coef >= 0.0)) fail("vf_coef", "must be >= 0");
  if (!(c.max_grad_norm > 0.0)) fail("max_grad_norm", "must be > 0");
  if (c.epochs == 0) fail("epochs", "must be positive");
  if (c.minibatch_size == 0) fail("minibatch_size", "must be positive");
  if (c.n_steps == 0) fail("n_steps", "must be positive");
  if (c.n_envs == 0) fail("n_envs", "must be positive");
  if (!(c.sup_coef >= 0.0)) fail("sup_coef", "must be >= 0");
  if (!(c.ema_alpha >= 0.0 && c.ema_alpha <= 1.0)) fail("ema_alpha", "must lie in [0, 1]");
  if (!(c.lr_end_fraction >= 0.0 && c.lr_end_fraction <= 1.0)) fail("lr_end_fraction", "must lie in [0, 1]");
  if (!(c.target_kl >= 0.0)) fail("target_kl", "must be >= 0");
  if (c.segment_length == 0) fail("segment_length", "must be positive");
}

nlohmann::json to_json(const PpoConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"lr_decay", c.lr_decay},
          {"lr_end_fraction", c.lr_end_fraction},
          {"target_kl", c.target_kl},
          {"gamma", c.gamma},
          {"gae_lambda", c.gae_lambda},
          {"clip_range", c.clip_range},
          {"ent_coef", c.ent_coef},
          {"vf_coef", c.vf_coef},
          {"max_grad_norm", c.max_grad_norm},
          {"epochs", c.epochs},
          {"minibatch_size", c.minibatch_size},
          {"n_steps", c.n_steps},
          {"n_envs", c.n_envs},
          {"total_steps", c.total_steps},
          {"sup_coef", c.sup_coef},
          {"sup_loss", c.sup_loss == PathwiseLoss::L1 ? "l1" : "l2"},
          {"ema_alpha", c.ema_alpha},
          {"segment_length", c.segment_length}};
}

PpoConfig ppo_config_from_json(const nlohmann::json& j, const PpoConfig& base) {
  PpoConfig c = base;
  for (const auto& [k, v] : j.items()) {
    if (k == "learning_rate") c.learning_rate = v.get<double>();
    else if (k == "lr_decay") c.lr_decay = v.get<double>();
    else if (k == "lr_end_fraction") c.lr_end_fraction = v.get<double>();
    else if (k == "target_kl") c.target_kl = v.get<double>();
    else if (k == "gamma") c.gamma = v.get<double>();
    else if (k == "gae_lambda") c.gae_lambda = v.get<double>();
    else if (k == "clip_range") c.clip_range = v.get<double>();
    else if (k == "ent_coef") c.ent_coef = v.get<double>();
    else if (k == "vf_coef") c.vf_coef = v.get<double>();
    else if (k == "max_grad_norm") c.max_grad_norm = v.get<double>();
    else if (k == "epochs") c.epochs = v.get<std::size_t>();
    else if (k == "minibatch_size") c.minibatch_size = v.get<std::size_t>();
    else if (k == "n_steps") c.n_steps = v.get<std::size_t>();
    else if (k == "n_envs") c.n_envs = v.get<std::size_t>();
    else if (k == "total_steps") c.total_steps = v.get<std::size_t>();
    else if (k == "sup_coef") c.sup_coef = v.get<double>();
    else if (k == "sup_loss") {
      const auto s = v.get<std::string>();
      if (s == "l1") c.sup_loss = PathwiseLoss::L1;
      else if (s == "l2") c.sup_loss = PathwiseLoss::L2;
      else throw std::invalid_argument("ppo.sup_loss: expected 'l1' or 'l2', got '" + s + "'");
    } else if (k == "ema_alpha") c.ema_alpha = v.get<double>();
    else if (k == "segment_length") c.segment_length = v.get<std::size_t>();
    else throw std::invalid_argument("ppo: unknown key '" + k + "'");
  }
  validate(c);
  return c;
}

SurrogateTerms clipped_surrogate(std::span<const double> new_lp, std::span<const double> old_lp,
                                 std::span<const double> adv, double clip) {
  if (new_lp.size() != old_lp.size() || new_lp.size() != adv.size()) {
    throw std::invalid_argument("clipped_surrogate: length mismatch");
  }
  SurrogateTerms out;
  const std::size_t n = new_lp.size();
  out.d_log_prob.assign(n, 0.0);
  if (n == 0) return out;
  const double inv = 1.0 / static_cast<double>(n);
  std::size_t clipped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double log_ratio = new_lp[i] - old_lp[i];
    const double r = std::exp(log_ratio);
    const double rc = std::clamp(r, 1.0 - clip, 1.0 + clip);
    const double unclipped = r * adv[i];
    const double clipped_obj = rc * adv[i];
    if (std::abs(r - 1.0) > clip) ++clipped;
    if (unclipped <= clipped_obj) {
      out.loss -= unclipped * inv;
      out.d_log_prob[i] = -adv[i] * r * inv;
    } else {
      out.loss -= clipped_obj * inv;
    }
    out.approx_kl += ((r - 1.0) - log_ratio) * inv;
  }
  out.clip_fraction = static_cast<double>(clipped) * inv;
  return out;
}

PathwiseTerms pathwise_l1(const Matrix& estimate, const Matrix& target) {
  if (estimate.rows() != target.rows() || estimate.cols() != target.cols()) {
    throw std::invalid_argument("pathwise_l1: estimate and target shapes differ");
  }
  PathwiseTerms out;
  out.grad = Matrix::Zero(estimate.rows(), estimate.cols());
  if (estimate.rows() == 0) return out;
  const double inv = 1.0 / static_cast<double>(estimate.rows());
  const Matrix diff = estimate - target;
  out.loss = diff.cwiseAbs().sum() * inv;
  for (Eigen::Index i = 0; i < diff.rows(); ++i)
    for (Eigen::Index j = 0; j < diff.cols(); ++j)
      out.grad(i, j) = diff(i, j) > 0.0 ? inv : (diff(i, j) < 0.0 ? -inv : 0.0);
  return out;
}

PathwiseTerms pathwise_l2(const Matrix& estimate, const Matrix& target) {
  if (estimate.rows() != target.rows() || estimate.cols() != target.cols()) {
    throw std::invalid_argument("pathwise_l2: estimate and target shapes differ");
  }
  PathwiseTerms out;
  out.grad = Matrix::Zero(estimate.rows(), estimate.cols());
  if (estimate.rows() == 0) return out;
  const double inv = 1.0 / static_cast<double>(estimate.rows());
  const Matrix diff = estimate - target;
  out.loss = diff.squaredNorm() * inv;
  out.grad = 2.0 * inv * diff;
  return out;
}

PathwiseTerms pathwise_loss(const Matrix& estimate, const Matrix& target, PathwiseLoss kind) {
  return kind == PathwiseLoss::L2 ? pathwise_l2(estimate, target) : pathwise_l1(estimate, target);
}

}  // namespace aed
