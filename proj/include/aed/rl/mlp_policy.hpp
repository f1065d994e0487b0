#pragma once

#include <vector>

#include "aed/numerics/checkpoint.hpp"
#include "aed/numerics/network.hpp"
#include "aed/rl/policy.hpp"

namespace aed {

struct MlpPolicyDims {
  std::size_t input_dim = 0;
  std::size_t action_dim = 0;
  std::size_t estimate_dim = 0;
  std::vector<std::size_t> trunk{32, 64, 128, 128};
  std::vector<std::size_t> head{128, 64};
  double initial_log_std = 0.0;
};

nlohmann::json to_json(const MlpPolicyDims& d);
MlpPolicyDims mlp_dims_from_json(const nlohmann::json& j);

/// Flat-observation actor-critic: shared ReLU trunk, then separate policy and
/// value heads. Used for the user-model controller and for small sanity tasks.
class MlpPolicy {
 public:
  using Observation = Vector;

  struct Batch {
    PolicyOutputs out;
    ForwardCache trunk_cache, policy_cache, value_cache;
    Eigen::Index rows = 0;
  };

  MlpPolicy() = default;
  MlpPolicy(const MlpPolicyDims& dims, Rng& rng);

  Batch forward_batch(std::span<const Observation* const> obs) const;
  void backward_batch(Batch& batch, const Matrix& d_mean, const Vector& d_value, const Matrix& d_estimate);

  /// Action mean for one observation without the value head or caches.
  Vector mean_action(const Vector& obs) const;

  /// Networks stored as `<prefix>trunk`, `<prefix>policy_head`,
  /// `<prefix>value_head`, plus the `<prefix>log_std` vector.
  void store(Checkpoint& ckpt, const std::string& prefix) const;
  static MlpPolicy restore(const Checkpoint& ckpt, const std::string& prefix, const MlpPolicyDims& dims);

  const Vector& log_std() const { return log_std_; }
  Vector& log_std() { return log_std_; }
  Vector& log_std_grad() { return log_std_grad_; }
  std::vector<ParameterBlock> parameter_blocks();
  void zero_grad();

  std::size_t input_dim() const { return dims_.input_dim; }
  std::size_t action_dim() const { return dims_.action_dim; }
  std::size_t estimate_dim() const { return dims_.estimate_dim; }
  const MlpPolicyDims& dims() const { return dims_; }

  const Network& trunk() const { return trunk_; }
  const Network& policy_head() const { return policy_head_; }
  const Network& value_head() const { return value_head_; }
  Network& trunk() { return trunk_; }
  Network& policy_head() { return policy_head_; }
  Network& value_head() { return value_head_; }

 private:
  MlpPolicyDims dims_;
  Network trunk_, policy_head_, value_head_;
  Vector log_std_;
  Vector log_std_grad_;
};

}  // namespace aed
