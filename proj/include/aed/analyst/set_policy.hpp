#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "aed/analyst/record.hpp"
#include "aed/numerics/checkpoint.hpp"
#include "aed/numerics/network.hpp"
#include "aed/rl/policy.hpp"

namespace aed {

enum class Architecture { Pooled, Relational };

std::string to_string(Architecture a);
Architecture architecture_from_string(const std::string& s);

struct SetPolicyDims {
  Architecture architecture = Architecture::Pooled;
  RecordLayout layout;
  std::size_t action_dim = 0;
  std::size_t estimate_dim = 0;
  std::size_t max_records = 4;  // M; the trunk sees n / M
  std::vector<std::size_t> encoder{32, 64, 128, 256};
  std::vector<std::size_t> global{256};  // g (relational only)
  std::vector<std::size_t> trunk{256, 64};
  std::vector<std::size_t> head{64, 64};
  double initial_log_std = 0.0;
};

nlohmann::json to_json(const SetPolicyDims& d);
SetPolicyDims set_dims_from_json(const nlohmann::json& j);
/// Config-file form: architecture, widths and initial_log_std only (the
/// task fills in the rest). Unknown keys are rejected.
nlohmann::json widths_to_json(const SetPolicyDims& d);
SetPolicyDims widths_from_json(const nlohmann::json& j, const SetPolicyDims& base);

/// Analyst actor-critic over a set of experiment records.
///
/// Pooled: e = mean_i enc(r_i), or a learned null embedding when there are
/// no records. Relational: e^l_i = sum over pairs of f_enc([c^target, pair]),
/// e^g = sum_i g([e^l_i, c^target_i]). Either embedding, with n / M appended,
/// feeds the trunk; the policy head emits [action mean, estimate] and the
/// value head a scalar.
class SetPolicy {
 public:
  using Observation = AnalystObservation;

  struct Batch {
    PolicyOutputs out;
    Eigen::Index rows = 0;
    std::vector<const EncodedRecord*> unique;           // distinct records in first-seen order
    std::vector<std::vector<std::size_t>> members;      // per observation: indices into `unique`
    std::vector<Eigen::Index> pair_offset;              // relational: first pair row of each unique record
    ForwardCache enc_cache, global_cache, trunk_cache, policy_cache, value_cache;
    std::size_t encoder_dim = 0;
  };

  SetPolicy() = default;
  SetPolicy(const SetPolicyDims& dims, Rng& rng);

  Batch forward_batch(std::span<const Observation* const> obs) const;
  void backward_batch(Batch& batch, const Matrix& d_mean, const Vector& d_value, const Matrix& d_estimate);

  /// Set embedding for one observation (what the trunk sees, minus n / M).
  Vector embed(const Observation& obs) const;

  void store(Checkpoint& ckpt, const std::string& prefix) const;
  static SetPolicy restore(const Checkpoint& ckpt, const std::string& prefix, const SetPolicyDims& dims);

  const Vector& log_std() const { return log_std_; }
  Vector& log_std() { return log_std_; }
  Vector& log_std_grad() { return log_std_grad_; }
  std::vector<ParameterBlock> parameter_blocks();
  void zero_grad();

  std::size_t action_dim() const { return dims_.action_dim; }
  std::size_t estimate_dim() const { return dims_.estimate_dim; }
  const SetPolicyDims& dims() const { return dims_; }

  Network& encoder() { return encoder_; }
  Network& global() { return global_; }
  const Network& encoder() const { return encoder_; }
  const Network& global() const { return global_; }

 private:
  std::size_t embedding_dim() const;
  void check_record(const EncodedRecord& r) const;

  SetPolicyDims dims_;
  Network encoder_, global_, trunk_, policy_head_, value_head_;
  Vector null_embedding_, null_grad_;  // pooled only
  Vector log_std_, log_std_grad_;
};

}  // namespace aed
