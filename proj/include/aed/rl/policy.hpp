#pragma once

#include <concepts>
#include <span>
#include <vector>

#include "aed/numerics/adam.hpp"
#include "aed/numerics/gaussian.hpp"
#include "aed/numerics/linalg.hpp"
#include "aed/numerics/rng.hpp"

namespace aed {

/// Common output layout of a batched forward pass.
struct PolicyOutputs {
  Matrix mean;      // B x action_dim
  Vector value;     // B
  Matrix estimate;  // B x estimate_dim (may have zero columns)
};

/// What PPO needs from a policy: a batched forward pass producing the
/// Gaussian action mean, value and (optionally) a deterministic estimate
/// block, and a backward pass taking gradients w.r.t. those three outputs.
///
/// Only the action mean is scored by the policy-gradient term; the estimate
/// block is trained by the pathwise regression loss.
template <class P>
concept ActorCritic = requires(P& p, const P& cp, std::span<const typename P::Observation* const> obs,
                               typename P::Batch& batch, const Matrix& m, const Vector& v) {
  typename P::Observation;
  typename P::Batch;
  { batch.out } -> std::convertible_to<const PolicyOutputs&>;
  { cp.forward_batch(obs) } -> std::same_as<typename P::Batch>;
  { p.backward_batch(batch, m, v, m) };
  { cp.log_std() } -> std::convertible_to<const Vector&>;
  { p.log_std_grad() } -> std::same_as<Vector&>;
  { p.parameter_blocks() } -> std::same_as<std::vector<ParameterBlock>>;
  { p.zero_grad() };
  { cp.action_dim() } -> std::convertible_to<std::size_t>;
  { cp.estimate_dim() } -> std::convertible_to<std::size_t>;
};

struct ActOutput {
  Vector action;
  double log_prob = 0.0;
  double value = 0.0;
  Vector estimate;
};

/// Samples one action per observation. `rngs[i]` drives observation i so the
/// result does not depend on how the caller batches.
template <ActorCritic P>
std::vector<ActOutput> act_batch(const P& policy, std::span<const typename P::Observation* const> obs,
                                 std::span<Rng* const> rngs, SampleMode mode) {
  const auto batch = policy.forward_batch(obs);
  std::vector<ActOutput> out(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    GaussianHead head{batch.out.mean.row(static_cast<Eigen::Index>(i)).transpose(), policy.log_std()};
    auto s = gaussian_sample(head, *rngs[i], mode);
    out[i].action = std::move(s.action);
    out[i].log_prob = s.log_prob;
    out[i].value = batch.out.value[static_cast<Eigen::Index>(i)];
    out[i].estimate = batch.out.estimate.row(static_cast<Eigen::Index>(i)).transpose();
  }
  return out;
}

template <ActorCritic P>
ActOutput act(const P& policy, const typename P::Observation& obs, Rng& rng, SampleMode mode) {
  const typename P::Observation* ptr = &obs;
  Rng* r = &rng;
  return act_batch(policy, std::span<const typename P::Observation* const>(&ptr, 1), std::span<Rng* const>(&r, 1),
                   mode)
      .front();
}

std::vector<double> flatten(std::span<const ParameterBlock> blocks);
void assign(std::span<const ParameterBlock> blocks, std::span<const double> flat);
std::size_t total_size(std::span<const ParameterBlock> blocks);

}  // namespace aed
