#include "aed/rl/mlp_policy.hpp"

#include <cmath>

namespace aed {
namespace {

Network relu_stack(std::size_t in, const std::vector<std::size_t>& widths) {
  std::vector<std::pair<std::size_t, Activation>> spec;
  for (auto w : widths) spec.emplace_back(w, Activation::ReLU);
  return Network(in, spec);
}

}  // namespace

MlpPolicy::MlpPolicy(const MlpPolicyDims& dims, Rng& rng) : dims_(dims) {
  trunk_ = relu_stack(dims.input_dim, dims.trunk);
  const std::size_t feat = dims.trunk.empty() ? dims.input_dim : dims.trunk.back();
  policy_head_ = Network::mlp(feat, dims.head, dims.action_dim + dims.estimate_dim);
  value_head_ = Network::mlp(feat, dims.head, 1);
  const double gain = std::sqrt(2.0);
  trunk_.init_orthogonal(rng, gain, gain);
  policy_head_.init_orthogonal(rng, gain, 0.01);
  value_head_.init_orthogonal(rng, gain, 1.0);
  log_std_ = Vector::Constant(static_cast<Eigen::Index>(dims.action_dim), dims.initial_log_std);
  log_std_grad_ = Vector::Zero(log_std_.size());
}

MlpPolicy::Batch MlpPolicy::forward_batch(std::span<const Observation* const> obs) const {
  Batch b;
  b.rows = static_cast<Eigen::Index>(obs.size());
  Matrix x(b.rows, static_cast<Eigen::Index>(dims_.input_dim));
  for (Eigen::Index i = 0; i < b.rows; ++i) {
    if (static_cast<std::size_t>(obs[i]->size()) != dims_.input_dim) {
      throw ShapeError("MlpPolicy: observation length " + std::to_string(obs[i]->size()) + ", expected " +
                       std::to_string(dims_.input_dim));
    }
    x.row(i) = obs[i]->transpose();
  }
  const Matrix feat = trunk_.forward(x, &b.trunk_cache);
  const Matrix head = policy_head_.forward(feat, &b.policy_cache);
  const auto a = static_cast<Eigen::Index>(dims_.action_dim);
  const auto e = static_cast<Eigen::Index>(dims_.estimate_dim);
  b.out.mean = head.leftCols(a);
  b.out.estimate = head.rightCols(e);
  b.out.value = value_head_.forward(feat, &b.value_cache).col(0);
  return b;
}

void MlpPolicy::backward_batch(Batch& b, const Matrix& d_mean, const Vector& d_value, const Matrix& d_estimate) {
  const auto a = static_cast<Eigen::Index>(dims_.action_dim);
  const auto e = static_cast<Eigen::Index>(dims_.estimate_dim);
  Matrix d_head = Matrix::Zero(b.rows, a + e);
  if (d_mean.size() > 0) d_head.leftCols(a) = d_mean;
  if (e > 0 && d_estimate.size() > 0) d_head.rightCols(e) = d_estimate;
  Matrix d_feat = policy_head_.backward(b.policy_cache, d_head);
  Matrix dv(b.rows, 1);
  if (d_value.size() > 0) dv.col(0) = d_value;
  else dv.setZero();
  d_feat += value_head_.backward(b.value_cache, dv);
  trunk_.backward(b.trunk_cache, d_feat);
}

Vector MlpPolicy::mean_action(const Vector& obs) const {
  const Vector head = policy_head_.forward(trunk_.forward(obs));
  return head.head(static_cast<Eigen::Index>(dims_.action_dim));
}

void MlpPolicy::store(Checkpoint& ckpt, const std::string& prefix) const {
  ckpt.networks.emplace_back(prefix + "trunk", trunk_);
  ckpt.networks.emplace_back(prefix + "policy_head", policy_head_);
  ckpt.networks.emplace_back(prefix + "value_head", value_head_);
  ckpt.vectors.emplace_back(prefix + "log_std", std::vector<double>(log_std_.data(), log_std_.data() + log_std_.size()));
}

MlpPolicy MlpPolicy::restore(const Checkpoint& ckpt, const std::string& prefix, const MlpPolicyDims& dims) {
  Rng rng(0);
  MlpPolicy p(dims, rng);
  auto copy_net = [&](Network& dst, const std::string& name) {
    const Network& src = ckpt.network(prefix + name);
    if (src.parameter_count() != dst.parameter_count() || src.input_dim() != dst.input_dim()) {
      throw CheckpointError("checkpoint network '" + prefix + name + "' does not match the declared dimensions");
    }
    std::copy(src.parameters().begin(), src.parameters().end(), dst.parameters().begin());
  };
  copy_net(p.trunk_, "trunk");
  copy_net(p.policy_head_, "policy_head");
  copy_net(p.value_head_, "value_head");
  const auto& ls = ckpt.vector(prefix + "log_std");
  if (ls.size() != dims.action_dim) throw CheckpointError("checkpoint log_std has the wrong length");
  p.log_std_ = Eigen::Map<const Vector>(ls.data(), static_cast<Eigen::Index>(ls.size()));
  return p;
}

nlohmann::json to_json(const MlpPolicyDims& d) {
  return {{"input_dim", d.input_dim}, {"action_dim", d.action_dim}, {"estimate_dim", d.estimate_dim},
          {"trunk", d.trunk},         {"head", d.head},             {"initial_log_std", d.initial_log_std}};
}

MlpPolicyDims mlp_dims_from_json(const nlohmann::json& j) {
  MlpPolicyDims d;
  d.input_dim = j.at("input_dim").get<std::size_t>();
  d.action_dim = j.at("action_dim").get<std::size_t>();
  d.estimate_dim = j.at("estimate_dim").get<std::size_t>();
  d.trunk = j.at("trunk").get<std::vector<std::size_t>>();
  d.head = j.at("head").get<std::vector<std::size_t>>();
  d.initial_log_std = j.value("initial_log_std", 0.0);
  return d;
}

std::vector<ParameterBlock> MlpPolicy::parameter_blocks() {
  return {
      {trunk_.parameters(), trunk_.gradients()},
      {policy_head_.parameters(), policy_head_.gradients()},
      {value_head_.parameters(), value_head_.gradients()},
      {{log_std_.data(), static_cast<std::size_t>(log_std_.size())},
       {log_std_grad_.data(), static_cast<std::size_t>(log_std_grad_.size())}},
  };
}

void MlpPolicy::zero_grad() {
  trunk_.zero_grad();
  policy_head_.zero_grad();
  value_head_.zero_grad();
  log_std_grad_.setZero();
}

}  // namespace aed
