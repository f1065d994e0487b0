#include "aed/numerics/network.hpp"

#include <atomic>
#include <sstream>

namespace aed {
namespace {

std::uint64_t next_network_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace

Network::Network(std::size_t input_dim, const std::vector<std::pair<std::size_t, Activation>>& layers)
    : input_dim_(input_dim), id_(next_network_id()) {
  if (input_dim == 0) throw ShapeError("network input dimension must be positive");
  std::size_t in = input_dim;
  for (const auto& [out, act] : layers) {
    if (out == 0) throw ShapeError("network layer width must be positive");
    layers_.push_back({in, out, act});
    in = out;
  }
  layout();
}

Network Network::mlp(std::size_t input_dim, std::span<const std::size_t> hidden, std::size_t output_dim) {
  std::vector<std::pair<std::size_t, Activation>> spec;
  for (std::size_t h : hidden) spec.emplace_back(h, Activation::ReLU);
  spec.emplace_back(output_dim, Activation::Identity);
  return Network(input_dim, spec);
}

Network::Network(const Network& other)
    : input_dim_(other.input_dim_),
      layers_(other.layers_),
      offsets_(other.offsets_),
      params_(other.params_),
      grads_(other.grads_),
      id_(next_network_id()) {}

Network& Network::operator=(const Network& other) {
  if (this != &other) {
    input_dim_ = other.input_dim_;
    layers_ = other.layers_;
    offsets_ = other.offsets_;
    params_ = other.params_;
    grads_ = other.grads_;
    id_ = next_network_id();
  }
  return *this;
}

void Network::layout() {
  offsets_.clear();
  std::size_t total = 0;
  for (const auto& l : layers_) {
    offsets_.push_back(total);
    total += l.in * l.out + l.out;
  }
  params_.assign(total, 0.0);
  grads_.assign(total, 0.0);
}

void Network::zero_grad() { std::fill(grads_.begin(), grads_.end(), 0.0); }

Eigen::Map<Matrix> Network::weight(std::size_t layer) {
  const auto& l = layers_.at(layer);
  return {params_.data() + offsets_[layer], static_cast<Eigen::Index>(l.in), static_cast<Eigen::Index>(l.out)};
}

Eigen::Map<const Matrix> Network::weight(std::size_t layer) const {
  const auto& l = layers_.at(layer);
  return {params_.data() + offsets_[layer], static_cast<Eigen::Index>(l.in), static_cast<Eigen::Index>(l.out)};
}

Eigen::Map<Vector> Network::bias(std::size_t layer) {
  const auto& l = layers_.at(layer);
  return {params_.data() + offsets_[layer] + l.in * l.out, static_cast<Eigen::Index>(l.out)};
}

Eigen::Map<const Vector> Network::bias(std::size_t layer) const {
  const auto& l = layers_.at(layer);
  return {params_.data() + offsets_[layer] + l.in * l.out, static_cast<Eigen::Index>(l.out)};
}

Matrix Network::forward(const Matrix& x, ForwardCache* cache) const {
  if (static_cast<std::size_t>(x.cols()) != input_dim_) {
    std::ostringstream msg;
    msg << "forward: input has " << x.cols() << " columns, network expects " << input_dim_;
    throw ShapeError(msg.str());
  }
  if (cache != nullptr) {
    cache->inputs.clear();
    cache->pre.clear();
    cache->owner = this;
    cache->owner_id = id_;
  }
  Matrix h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Matrix z = h * weight(i);
    z.rowwise() += bias(i).transpose();
    if (cache != nullptr) {
      cache->inputs.push_back(std::move(h));
      cache->pre.push_back(z);
    }
    if (layers_[i].activation == Activation::ReLU) {
      h = z.cwiseMax(0.0);
    } else {
      h = std::move(z);
    }
  }
  return h;
}

Vector Network::forward(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != input_dim_) {
    std::ostringstream msg;
    msg << "forward: input has length " << x.size() << ", network expects " << input_dim_;
    throw ShapeError(msg.str());
  }
  Vector h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Vector z = weight(i).transpose() * h + bias(i);
    if (layers_[i].activation == Activation::ReLU) z = z.cwiseMax(0.0);
    h = std::move(z);
  }
  return h;
}

Matrix Network::backward(const ForwardCache& cache, const Matrix& grad_output) {
  if (cache.owner != this || cache.owner_id != id_ || cache.pre.size() != layers_.size()) {
    throw ShapeError("backward: cache was not produced by this network");
  }
  if (!layers_.empty() && (grad_output.cols() != cache.pre.back().cols() ||
                           grad_output.rows() != cache.pre.back().rows())) {
    std::ostringstream msg;
    msg << "backward: grad_output is " << grad_output.rows() << "x" << grad_output.cols() << ", expected "
        << cache.pre.back().rows() << "x" << cache.pre.back().cols();
    throw ShapeError(msg.str());
  }
  Matrix g = grad_output;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& l = layers_[k];
    if (l.activation == Activation::ReLU) {
      g = (cache.pre[k].array() > 0.0).select(g, 0.0);
    }
    const std::size_t off = offsets_[k];
    Eigen::Map<Matrix> dw(grads_.data() + off, static_cast<Eigen::Index>(l.in), static_cast<Eigen::Index>(l.out));
    Eigen::Map<Vector> db(grads_.data() + off + l.in * l.out, static_cast<Eigen::Index>(l.out));
    dw.noalias() += cache.inputs[k].transpose() * g;
    db.noalias() += g.colwise().sum().transpose();
    Matrix next = g * weight(k).transpose();
    g = std::move(next);
  }
  return g;
}

void Network::init_orthogonal(Rng& rng, double hidden_gain, double output_gain) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    const bool last = i + 1 == layers_.size();
    const double gain = last ? output_gain : hidden_gain;
    const Eigen::Index rows = static_cast<Eigen::Index>(std::max(l.in, l.out));
    const Eigen::Index cols = static_cast<Eigen::Index>(std::min(l.in, l.out));
    Matrix a(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) a(r, c) = standard_normal(rng);
    Eigen::HouseholderQR<Matrix> qr(a);
    Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
    // Sign correction makes the draw uniform over the orthogonal group.
    Matrix r = qr.matrixQR().topRows(cols).template triangularView<Eigen::Upper>();
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (r(c, c) < 0.0) q.col(c) *= -1.0;
    }
    auto w = weight(i);
    if (l.in >= l.out) {
      w = gain * q;
    } else {
      w = gain * q.transpose();
    }
    bias(i).setZero();
  }
}

std::string describe(const Network& net) {
  std::ostringstream out;
  out << net.input_dim();
  for (const auto& l : net.layers()) {
    out << " -> " << l.out << (l.activation == Activation::ReLU ? " relu" : "");
  }
  return out.str();
}

}  // namespace aed
