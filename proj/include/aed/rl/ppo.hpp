#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "aed/rl/gae.hpp"
#include "aed/rl/policy.hpp"
#include "aed/rl/rollout.hpp"

namespace aed {

enum class PathwiseLoss { L1, L2 };

struct PpoConfig {
  double learning_rate = 2e-4;
  double lr_decay = 1.0;  // multiplicative per iteration
  // Linear anneal: the rate reaches lr_end_fraction × its start at the end.
  double lr_end_fraction = 1.0;
  // Stop an update's epochs once a minibatch's approx KL exceeds
  // 1.5 × target_kl; 0 disables.
  double target_kl = 0.0;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_range = 0.18;
  double ent_coef = 0.001;
  double vf_coef = 0.5;
  double max_grad_norm = 0.55;
  std::size_t epochs = 10;
  std::size_t minibatch_size = 256;
  std::size_t n_steps = 256;  // per environment per iteration
  std::size_t n_envs = 8;
  std::size_t total_steps = 3'000'000;
  double sup_coef = 1.0;    // pathwise estimate loss weight
  PathwiseLoss sup_loss = PathwiseLoss::L1;
  double ema_alpha = 0.99;  // shadow smoothing; used only by tasks with estimates
  // Rows are shuffled in blocks of consecutive steps of one environment, so
  // observations that share history stay in the same minibatch.
  std::size_t segment_length = 1;
};

/// Throws std::invalid_argument naming the offending field.
void validate(const PpoConfig& cfg);
nlohmann::json to_json(const PpoConfig& cfg);
/// Overrides `base` with the keys present; unknown keys are rejected.
PpoConfig ppo_config_from_json(const nlohmann::json& j, const PpoConfig& base);

struct PpoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double pathwise_loss = 0.0;
  double grad_norm = 0.0;
  std::size_t minibatches = 0;
  std::size_t skipped_steps = 0;
  bool aborted = false;
  bool early_stopped = false;  // target_kl tripped
};

struct SurrogateTerms {
  double loss = 0.0;           // mean of −min(rA, clip(r)A)
  double clip_fraction = 0.0;  // share of rows with |r − 1| > clip
  double approx_kl = 0.0;      // mean of (r − 1) − ln r
  std::vector<double> d_log_prob;  // ∂loss/∂ new log-prob, already divided by the batch size
};

SurrogateTerms clipped_surrogate(std::span<const double> new_log_prob, std::span<const double> old_log_prob,
                                 std::span<const double> advantages, double clip);

struct PathwiseTerms {
  double loss = 0.0;  // mean over rows of the L1 norm
  Matrix grad;        // ∂loss/∂estimate
};

/// L1 regression of estimates onto targets: rows × estimate_dim each.
PathwiseTerms pathwise_l1(const Matrix& estimate, const Matrix& target);
/// Mean over rows of the squared L2 norm.
PathwiseTerms pathwise_l2(const Matrix& estimate, const Matrix& target);
PathwiseTerms pathwise_loss(const Matrix& estimate, const Matrix& target, PathwiseLoss kind);

namespace detail {

inline bool has_target(const Vector& v) { return v.size() > 0; }

template <ActorCritic P>
void add_gaussian_grads(P& policy, const Matrix& mean, std::span<const Vector> actions, std::span<const double> d_lp,
                        double ent_coef, Matrix& d_mean) {
  const Vector ls = clamped_log_std(policy.log_std());
  const Vector inv_var = (-2.0 * ls.array()).exp();
  Vector d_ls = Vector::Zero(ls.size());
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const Vector diff = actions[i] - mean.row(r).transpose();
    d_mean.row(r) = (d_lp[i] * diff.cwiseProduct(inv_var)).transpose();
    d_ls.array() += d_lp[i] * (diff.array().square() * inv_var.array() - 1.0);
  }
  d_ls.array() -= ent_coef;
  Vector& g = policy.log_std_grad();
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    const double raw = policy.log_std()[j];
    if (raw > kLogStdMin && raw < kLogStdMax) g[j] += d_ls[j];
  }
}

}  // namespace detail

/// Runs cfg.epochs passes of shuffled minibatch updates. Each minibatch step
/// minimises clipped surrogate + vf_coef · value MSE − ent_coef · entropy +
/// sup_coef · pathwise L1 (rows that carry a target, plus the buffer's extra
/// supervision rows spread over the minibatches). With target_kl set, the
/// update stops before the first minibatch whose approx KL exceeds
/// 1.5 × target_kl. A non-finite loss restores
/// the weights and optimiser state held on entry and reports `aborted`.
template <ActorCritic P, class Obs>
  requires std::same_as<typename P::Observation, Obs>
PpoStats ppo_update(P& policy, OptimState& optim, const RolloutBuffer<Obs>& buf, const PpoConfig& cfg, Rng& rng) {
  if (!buf.finalised) throw std::logic_error("ppo_update: buffer advantages not computed");
  const std::size_t n = buf.size();
  PpoStats stats;
  if (n == 0) return stats;

  auto blocks = policy.parameter_blocks();
  const std::vector<double> snapshot = flatten(blocks);
  const OptimState optim_snapshot = optim;
  optim.config.max_grad_norm = cfg.max_grad_norm;

  const std::size_t seg = std::max<std::size_t>(1, cfg.segment_length);
  std::vector<std::vector<std::size_t>> segments;
  for (std::size_t e = 0; e < buf.n_envs; ++e) {
    for (std::size_t t0 = 0; t0 < buf.n_steps; t0 += seg) {
      std::vector<std::size_t> s;
      for (std::size_t t = t0; t < std::min(buf.n_steps, t0 + seg); ++t) s.push_back(buf.index(t, e));
      segments.push_back(std::move(s));
    }
  }
  const std::size_t mb = std::max<std::size_t>(1, std::min(cfg.minibatch_size, n));
  const std::size_t n_mb = (n + mb - 1) / mb;
  std::vector<std::size_t> sup_order(buf.supervision.size());
  std::iota(sup_order.begin(), sup_order.end(), 0);

  const auto a_dim = static_cast<Eigen::Index>(policy.action_dim());
  const auto e_dim = static_cast<Eigen::Index>(policy.estimate_dim());
  double sum_pl = 0, sum_vl = 0, sum_ent = 0, sum_cf = 0, sum_kl = 0, sum_pw = 0, sum_gn = 0;
  std::size_t pw_batches = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs && !stats.early_stopped; ++epoch) {
    std::shuffle(segments.begin(), segments.end(), rng);
    std::shuffle(sup_order.begin(), sup_order.end(), rng);
    std::vector<std::size_t> order;
    order.reserve(n);
    for (const auto& s : segments) order.insert(order.end(), s.begin(), s.end());

    for (std::size_t k = 0; k < n_mb; ++k) {
      const std::size_t lo = k * mb, hi = std::min(n, lo + mb);
      const std::size_t b = hi - lo;
      const std::size_t s_lo = k * sup_order.size() / n_mb, s_hi = (k + 1) * sup_order.size() / n_mb;

      std::vector<const Obs*> obs;
      obs.reserve(b + (s_hi - s_lo));
      for (std::size_t i = lo; i < hi; ++i) obs.push_back(&buf.observations[order[i]]);
      for (std::size_t i = s_lo; i < s_hi; ++i) obs.push_back(&buf.supervision[sup_order[i]].first);
      const auto rows = static_cast<Eigen::Index>(obs.size());

      auto batch = policy.forward_batch(std::span<const Obs* const>(obs));
      const PolicyOutputs& out = batch.out;

      std::vector<double> new_lp(b), old_lp(b), adv(b);
      std::vector<Vector> actions(b);
      for (std::size_t i = 0; i < b; ++i) {
        const std::size_t row = order[lo + i];
        actions[i] = buf.actions[row];
        new_lp[i] = gaussian_log_prob(out.mean.row(static_cast<Eigen::Index>(i)).transpose(), policy.log_std(),
                                      actions[i]);
        old_lp[i] = buf.log_probs[row];
        adv[i] = buf.advantages[row];
      }
      const SurrogateTerms sur = clipped_surrogate(new_lp, old_lp, adv, cfg.clip_range);
      if (cfg.target_kl > 0.0 && sur.approx_kl > 1.5 * cfg.target_kl) {
        stats.early_stopped = true;
        break;
      }

      Matrix d_mean = Matrix::Zero(rows, a_dim);
      Vector d_value = Vector::Zero(rows);
      Matrix d_est = Matrix::Zero(rows, e_dim);

      double vl = 0.0;
      for (std::size_t i = 0; i < b; ++i) {
        const double diff = out.value[static_cast<Eigen::Index>(i)] - buf.returns[order[lo + i]];
        vl += diff * diff;
        d_value[static_cast<Eigen::Index>(i)] = cfg.vf_coef * 2.0 * diff / static_cast<double>(b);
      }
      vl /= static_cast<double>(b);
      const double ent = gaussian_entropy(policy.log_std());

      double pw = 0.0;
      if (e_dim > 0) {
        std::vector<Eigen::Index> sup_rows;
        std::vector<const Vector*> targets;
        for (std::size_t i = 0; i < b; ++i) {
          const Vector& t = buf.targets[order[lo + i]];
          if (detail::has_target(t)) {
            sup_rows.push_back(static_cast<Eigen::Index>(i));
            targets.push_back(&t);
          }
        }
        for (std::size_t i = s_lo; i < s_hi; ++i) {
          sup_rows.push_back(static_cast<Eigen::Index>(b + i - s_lo));
          targets.push_back(&buf.supervision[sup_order[i]].second);
        }
        if (!sup_rows.empty()) {
          Matrix est(static_cast<Eigen::Index>(sup_rows.size()), e_dim), tgt(est.rows(), e_dim);
          for (std::size_t j = 0; j < sup_rows.size(); ++j) {
            est.row(static_cast<Eigen::Index>(j)) = out.estimate.row(sup_rows[j]);
            tgt.row(static_cast<Eigen::Index>(j)) = targets[j]->transpose();
          }
          const PathwiseTerms p = pathwise_loss(est, tgt, cfg.sup_loss);
          pw = p.loss;
          for (std::size_t j = 0; j < sup_rows.size(); ++j) {
            d_est.row(sup_rows[j]) = cfg.sup_coef * p.grad.row(static_cast<Eigen::Index>(j));
          }
          ++pw_batches;
        }
      }

      const double loss = sur.loss + cfg.vf_coef * vl - cfg.ent_coef * ent + cfg.sup_coef * pw;
      if (!std::isfinite(loss) || !out.mean.allFinite() || !out.value.allFinite()) {
        assign(blocks, snapshot);
        optim = optim_snapshot;
        policy.zero_grad();
        stats.aborted = true;
        return stats;
      }

      policy.zero_grad();
      Matrix d_mean_rows = Matrix::Zero(static_cast<Eigen::Index>(b), a_dim);
      detail::add_gaussian_grads(policy, out.mean.topRows(static_cast<Eigen::Index>(b)), actions, sur.d_log_prob,
                                 cfg.ent_coef, d_mean_rows);
      d_mean.topRows(static_cast<Eigen::Index>(b)) = d_mean_rows;
      policy.backward_batch(batch, d_mean, d_value, d_est);
      const AdamReport rep = adam_step(blocks, optim);
      if (!rep.applied) ++stats.skipped_steps;

      sum_pl += sur.loss;
      sum_vl += vl;
      sum_ent += ent;
      sum_cf += sur.clip_fraction;
      sum_kl += sur.approx_kl;
      sum_pw += pw;
      sum_gn += rep.grad_norm;
      ++stats.minibatches;
    }
  }
  policy.zero_grad();
  const double m = static_cast<double>(std::max<std::size_t>(1, stats.minibatches));
  stats.policy_loss = sum_pl / m;
  stats.value_loss = sum_vl / m;
  stats.entropy = sum_ent / m;
  stats.clip_fraction = sum_cf / m;
  stats.approx_kl = sum_kl / m;
  stats.grad_norm = sum_gn / m;
  stats.pathwise_loss = pw_batches > 0 ? sum_pw / static_cast<double>(pw_batches) : 0.0;
  return stats;
}

/// Standalone pathwise step: one Adam update on the estimate loss over
/// `obs` against `targets`, scaled by `weight`. No targets means no-op and a
/// zero loss.
template <ActorCritic P>
double pathwise_estimate_update(P& policy, OptimState& optim, std::span<const typename P::Observation* const> obs,
                                std::span<const Vector> targets, double weight,
                                PathwiseLoss kind = PathwiseLoss::L1) {
  if (obs.size() != targets.size()) throw std::invalid_argument("pathwise_estimate_update: size mismatch");
  if (obs.empty() || policy.estimate_dim() == 0) return 0.0;
  const auto e_dim = static_cast<Eigen::Index>(policy.estimate_dim());
  auto batch = policy.forward_batch(obs);
  const auto rows = static_cast<Eigen::Index>(obs.size());
  Matrix tgt(rows, e_dim);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (targets[static_cast<std::size_t>(i)].size() != e_dim) {
      throw std::invalid_argument("pathwise_estimate_update: target dimension mismatch");
    }
    tgt.row(i) = targets[static_cast<std::size_t>(i)].transpose();
  }
  const PathwiseTerms p = pathwise_loss(batch.out.estimate, tgt, kind);
  if (!std::isfinite(p.loss)) return p.loss;
  policy.zero_grad();
  policy.backward_batch(batch, Matrix::Zero(rows, static_cast<Eigen::Index>(policy.action_dim())),
                        Vector::Zero(rows), weight * p.grad);
  auto blocks = policy.parameter_blocks();
  adam_step(blocks, optim);
  policy.zero_grad();
  return p.loss;
}

}  // namespace aed
