#include "aed/analyst/set_policy.hpp"

#include <cmath>

namespace aed {
namespace {

Network relu_stack(std::size_t in, const std::vector<std::size_t>& widths) {
  std::vector<std::pair<std::size_t, Activation>> spec;
  for (auto w : widths) spec.emplace_back(w, Activation::ReLU);
  return Network(in, spec);
}

}  // namespace

std::string to_string(Architecture a) { return a == Architecture::Pooled ? "pooled" : "relational"; }

Architecture architecture_from_string(const std::string& s) {
  if (s == "pooled") return Architecture::Pooled;
  if (s == "relational") return Architecture::Relational;
  throw std::invalid_argument("unknown architecture '" + s + "' (expected pooled or relational)");
}

nlohmann::json to_json(const SetPolicyDims& d) {
  return {{"architecture", to_string(d.architecture)},
          {"flat_dim", d.layout.flat_dim},
          {"pair_dim", d.layout.pair_dim},
          {"action_dim", d.action_dim},
          {"estimate_dim", d.estimate_dim},
          {"max_records", d.max_records},
          {"encoder", d.encoder},
          {"global", d.global},
          {"trunk", d.trunk},
          {"head", d.head},
          {"initial_log_std", d.initial_log_std}};
}

SetPolicyDims set_dims_from_json(const nlohmann::json& j) {
  SetPolicyDims d;
  d.architecture = architecture_from_string(j.at("architecture").get<std::string>());
  d.layout.flat_dim = j.at("flat_dim").get<std::size_t>();
  d.layout.pair_dim = j.at("pair_dim").get<std::size_t>();
  d.action_dim = j.at("action_dim").get<std::size_t>();
  d.estimate_dim = j.at("estimate_dim").get<std::size_t>();
  d.max_records = j.at("max_records").get<std::size_t>();
  d.encoder = j.at("encoder").get<std::vector<std::size_t>>();
  d.global = j.at("global").get<std::vector<std::size_t>>();
  d.trunk = j.at("trunk").get<std::vector<std::size_t>>();
  d.head = j.at("head").get<std::vector<std::size_t>>();
  d.initial_log_std = j.value("initial_log_std", 0.0);
  return d;
}

nlohmann::json widths_to_json(const SetPolicyDims& d) {
  return {{"architecture", to_string(d.architecture)},
          {"encoder", d.encoder},
          {"global", d.global},
          {"trunk", d.trunk},
          {"head", d.head},
          {"initial_log_std", d.initial_log_std}};
}

SetPolicyDims widths_from_json(const nlohmann::json& j, const SetPolicyDims& base) {
  SetPolicyDims d = base;
  for (const auto& [k, v] : j.items()) {
    if (k == "architecture") d.architecture = architecture_from_string(v.get<std::string>());
    else if (k == "encoder") d.encoder = v.get<std::vector<std::size_t>>();
    else if (k == "global") d.global = v.get<std::vector<std::size_t>>();
    else if (k == "trunk") d.trunk = v.get<std::vector<std::size_t>>();
    else if (k == "head") d.head = v.get<std::vector<std::size_t>>();
    else if (k == "initial_log_std") d.initial_log_std = v.get<double>();
    else throw std::invalid_argument("network: unknown key '" + k + "'");
  }
  if (d.encoder.empty()) throw std::invalid_argument("network.encoder: needs at least one layer");
  return d;
}

SetPolicy::SetPolicy(const SetPolicyDims& dims, Rng& rng) : dims_(dims) {
  if (dims.encoder.empty()) throw std::invalid_argument("SetPolicy: encoder needs at least one layer");
  if (dims.max_records == 0) throw std::invalid_argument("SetPolicy: max_records must be positive");
  const bool rel = dims.architecture == Architecture::Relational;
  if (rel && dims.layout.pair_dim == 0) throw std::invalid_argument("SetPolicy: relational layout needs pair_dim > 0");
  if (rel && dims.global.empty()) throw std::invalid_argument("SetPolicy: relational policy needs a g network");
  const double gain = std::sqrt(2.0);
  const std::size_t enc_in = rel ? dims.layout.flat_dim + dims.layout.pair_dim : dims.layout.flat_dim;
  encoder_ = relu_stack(enc_in, dims.encoder);
  encoder_.init_orthogonal(rng, gain, gain);
  if (rel) {
    global_ = relu_stack(dims.encoder.back() + dims.layout.flat_dim, dims.global);
    global_.init_orthogonal(rng, gain, gain);
  }
  const std::size_t emb = embedding_dim();
  trunk_ = relu_stack(emb + 1, dims.trunk);
  trunk_.init_orthogonal(rng, gain, gain);
  const std::size_t feat = dims.trunk.empty() ? emb + 1 : dims.trunk.back();
  policy_head_ = Network::mlp(feat, dims.head, dims.action_dim + dims.estimate_dim);
  value_head_ = Network::mlp(feat, dims.head, 1);
  policy_head_.init_orthogonal(rng, gain, 0.01);
  value_head_.init_orthogonal(rng, gain, 1.0);
  null_embedding_ = Vector::Zero(rel ? 0 : static_cast<Eigen::Index>(emb));
  null_grad_ = Vector::Zero(null_embedding_.size());
  log_std_ = Vector::Constant(static_cast<Eigen::Index>(dims.action_dim), dims.initial_log_std);
  log_std_grad_ = Vector::Zero(log_std_.size());
}

std::size_t SetPolicy::embedding_dim() const {
  return dims_.architecture == Architecture::Relational ? dims_.global.back() : dims_.encoder.back();
}

void SetPolicy::check_record(const EncodedRecord& r) const {
  if (static_cast<std::size_t>(r.flat.size()) != dims_.layout.flat_dim) {
    throw ShapeError("SetPolicy: record width " + std::to_string(r.flat.size()) + ", expected " +
                     std::to_string(dims_.layout.flat_dim));
  }
  if (dims_.architecture == Architecture::Relational && r.pairs.rows() > 0 &&
      static_cast<std::size_t>(r.pairs.cols()) != dims_.layout.pair_dim) {
    throw ShapeError("SetPolicy: pair width " + std::to_string(r.pairs.cols()) + ", expected " +
                     std::to_string(dims_.layout.pair_dim));
  }
}

SetPolicy::Batch SetPolicy::forward_batch(std::span<const Observation* const> obs) const {
  Batch b;
  b.rows = static_cast<Eigen::Index>(obs.size());
  b.members.resize(obs.size());
  std::unordered_map<const EncodedRecord*, std::size_t> index;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    for (const auto& r : obs[i]->records) {
      if (!r) throw std::invalid_argument("SetPolicy: null record");
      auto [it, fresh] = index.try_emplace(r.get(), b.unique.size());
      if (fresh) {
        check_record(*r);
        b.unique.push_back(r.get());
      }
      b.members[i].push_back(it->second);
    }
  }
  const auto U = static_cast<Eigen::Index>(b.unique.size());
  const auto F = static_cast<Eigen::Index>(dims_.layout.flat_dim);
  const auto E = static_cast<Eigen::Index>(embedding_dim());
  b.encoder_dim = dims_.encoder.back();

  Matrix per_record;  // U x E: the quantity each observation pools
  if (dims_.architecture == Architecture::Pooled) {
    Matrix x(U, F);
    for (Eigen::Index u = 0; u < U; ++u) x.row(u) = b.unique[static_cast<std::size_t>(u)]->flat.transpose();
    per_record = encoder_.forward(x, &b.enc_cache);
  } else {
    const auto P = static_cast<Eigen::Index>(dims_.layout.pair_dim);
    b.pair_offset.resize(b.unique.size() + 1, 0);
    for (std::size_t u = 0; u < b.unique.size(); ++u) b.pair_offset[u + 1] = b.pair_offset[u] + b.unique[u]->pairs.rows();
    Matrix x(b.pair_offset.back(), F + P);
    for (std::size_t u = 0; u < b.unique.size(); ++u) {
      const EncodedRecord& r = *b.unique[u];
      for (Eigen::Index k = 0; k < r.pairs.rows(); ++k) {
        x.row(b.pair_offset[u] + k) << r.flat.transpose(), r.pairs.row(k);
      }
    }
    const Matrix pe = encoder_.forward(x, &b.enc_cache);
    const auto D = static_cast<Eigen::Index>(b.encoder_dim);
    Matrix g_in(U, D + F);
    for (std::size_t u = 0; u < b.unique.size(); ++u) {
      const auto lo = b.pair_offset[u], n = b.pair_offset[u + 1] - lo;
      const auto row = static_cast<Eigen::Index>(u);
      if (n > 0) g_in.row(row).head(D) = pe.middleRows(lo, n).colwise().sum();
      else g_in.row(row).head(D).setZero();
      g_in.row(row).tail(F) = b.unique[u]->flat.transpose();
    }
    per_record = global_.forward(g_in, &b.global_cache);
  }

  Matrix t_in(b.rows, E + 1);
  const double inv_m = 1.0 / static_cast<double>(dims_.max_records);
  for (Eigen::Index i = 0; i < b.rows; ++i) {
    const auto& mem = b.members[static_cast<std::size_t>(i)];
    auto emb = t_in.row(i).head(E);
    if (mem.empty()) {
      if (dims_.architecture == Architecture::Pooled) emb = null_embedding_.transpose();
      else emb.setZero();
    } else {
      emb.setZero();
      for (auto u : mem) emb += per_record.row(static_cast<Eigen::Index>(u));
      if (dims_.architecture == Architecture::Pooled) emb /= static_cast<double>(mem.size());
    }
    t_in(i, E) = static_cast<double>(mem.size()) * inv_m;
  }
  const Matrix feat = trunk_.forward(t_in, &b.trunk_cache);
  const Matrix head = policy_head_.forward(feat, &b.policy_cache);
  const auto a = static_cast<Eigen::Index>(dims_.action_dim);
  const auto e = static_cast<Eigen::Index>(dims_.estimate_dim);
  b.out.mean = head.leftCols(a);
  b.out.estimate = head.rightCols(e);
  b.out.value = value_head_.forward(feat, &b.value_cache).col(0);
  return b;
}

void SetPolicy::backward_batch(Batch& b, const Matrix& d_mean, const Vector& d_value, const Matrix& d_estimate) {
  const auto a = static_cast<Eigen::Index>(dims_.action_dim);
  const auto e = static_cast<Eigen::Index>(dims_.estimate_dim);
  Matrix d_head = Matrix::Zero(b.rows, a + e);
  if (d_mean.size() > 0) d_head.leftCols(a) = d_mean;
  if (e > 0 && d_estimate.size() > 0) d_head.rightCols(e) = d_estimate;
  Matrix d_feat = policy_head_.backward(b.policy_cache, d_head);
  Matrix dv = Matrix::Zero(b.rows, 1);
  if (d_value.size() > 0) dv.col(0) = d_value;
  d_feat += value_head_.backward(b.value_cache, dv);
  const Matrix d_tin = trunk_.backward(b.trunk_cache, d_feat);

  const auto E = static_cast<Eigen::Index>(embedding_dim());
  const auto U = static_cast<Eigen::Index>(b.unique.size());
  Matrix d_rec = Matrix::Zero(U, E);
  for (Eigen::Index i = 0; i < b.rows; ++i) {
    const auto& mem = b.members[static_cast<std::size_t>(i)];
    const auto d = d_tin.row(i).head(E);
    if (mem.empty()) {
      if (dims_.architecture == Architecture::Pooled) null_grad_ += d.transpose();
      continue;
    }
    const double scale = dims_.architecture == Architecture::Pooled ? 1.0 / static_cast<double>(mem.size()) : 1.0;
    for (auto u : mem) d_rec.row(static_cast<Eigen::Index>(u)) += scale * d;
  }
  if (dims_.architecture == Architecture::Pooled) {
    encoder_.backward(b.enc_cache, d_rec);
    return;
  }
  const Matrix d_gin = global_.backward(b.global_cache, d_rec);
  const auto D = static_cast<Eigen::Index>(b.encoder_dim);
  Matrix d_pe(b.pair_offset.back(), D);
  for (std::size_t u = 0; u < b.unique.size(); ++u) {
    const auto lo = b.pair_offset[u], n = b.pair_offset[u + 1] - lo;
    for (Eigen::Index k = 0; k < n; ++k) d_pe.row(lo + k) = d_gin.row(static_cast<Eigen::Index>(u)).head(D);
  }
  encoder_.backward(b.enc_cache, d_pe);
}

Vector SetPolicy::embed(const Observation& obs) const {
  const Observation* p = &obs;
  const Batch b = forward_batch(std::span<const Observation* const>(&p, 1));
  const Matrix& t_in = b.trunk_cache.inputs.front();
  return t_in.row(0).head(static_cast<Eigen::Index>(embedding_dim())).transpose();
}

void SetPolicy::store(Checkpoint& ckpt, const std::string& prefix) const {
  ckpt.networks.emplace_back(prefix + "encoder", encoder_);
  if (dims_.architecture == Architecture::Relational) ckpt.networks.emplace_back(prefix + "global", global_);
  ckpt.networks.emplace_back(prefix + "trunk", trunk_);
  ckpt.networks.emplace_back(prefix + "policy_head", policy_head_);
  ckpt.networks.emplace_back(prefix + "value_head", value_head_);
  auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  ckpt.vectors.emplace_back(prefix + "log_std", vec(log_std_));
  if (dims_.architecture == Architecture::Pooled) ckpt.vectors.emplace_back(prefix + "null_embedding", vec(null_embedding_));
}

SetPolicy SetPolicy::restore(const Checkpoint& ckpt, const std::string& prefix, const SetPolicyDims& dims) {
  Rng rng(0);
  SetPolicy p(dims, rng);
  auto copy_net = [&](Network& dst, const std::string& name) {
    const Network& src = ckpt.network(prefix + name);
    if (src.parameter_count() != dst.parameter_count() || src.input_dim() != dst.input_dim()) {
      throw CheckpointError("checkpoint network '" + prefix + name + "' does not match the declared dimensions");
    }
    std::copy(src.parameters().begin(), src.parameters().end(), dst.parameters().begin());
  };
  auto copy_vec = [&](Vector& dst, const std::string& name) {
    const auto& src = ckpt.vector(prefix + name);
    if (static_cast<Eigen::Index>(src.size()) != dst.size()) {
      throw CheckpointError("checkpoint vector '" + prefix + name + "' has the wrong length");
    }
    dst = Eigen::Map<const Vector>(src.data(), dst.size());
  };
  copy_net(p.encoder_, "encoder");
  if (dims.architecture == Architecture::Relational) copy_net(p.global_, "global");
  copy_net(p.trunk_, "trunk");
  copy_net(p.policy_head_, "policy_head");
  copy_net(p.value_head_, "value_head");
  copy_vec(p.log_std_, "log_std");
  if (dims.architecture == Architecture::Pooled) copy_vec(p.null_embedding_, "null_embedding");
  return p;
}

std::vector<ParameterBlock> SetPolicy::parameter_blocks() {
  auto vb = [](Vector& v, Vector& g) {
    return ParameterBlock{{v.data(), static_cast<std::size_t>(v.size())}, {g.data(), static_cast<std::size_t>(g.size())}};
  };
  std::vector<ParameterBlock> blocks{{encoder_.parameters(), encoder_.gradients()}};
  if (dims_.architecture == Architecture::Relational) blocks.push_back({global_.parameters(), global_.gradients()});
  blocks.push_back({trunk_.parameters(), trunk_.gradients()});
  blocks.push_back({policy_head_.parameters(), policy_head_.gradients()});
  blocks.push_back({value_head_.parameters(), value_head_.gradients()});
  if (dims_.architecture == Architecture::Pooled) blocks.push_back(vb(null_embedding_, null_grad_));
  blocks.push_back(vb(log_std_, log_std_grad_));
  return blocks;
}

void SetPolicy::zero_grad() {
  encoder_.zero_grad();
  global_.zero_grad();
  trunk_.zero_grad();
  policy_head_.zero_grad();
  value_head_.zero_grad();
  null_grad_.setZero();
  log_std_grad_.setZero();
}

}  // namespace aed
