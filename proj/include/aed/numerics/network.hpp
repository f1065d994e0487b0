#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "aed/numerics/linalg.hpp"
#include "aed/numerics/rng.hpp"

namespace aed {

enum class Activation : std::uint8_t { Identity = 0, ReLU = 1 };

struct LayerShape {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::Identity;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Network;

/// Activation record of one forward pass, consumed by Network::backward.
struct ForwardCache {
  std::vector<Matrix> inputs;       // input to each layer
  std::vector<Matrix> pre;          // pre-activation of each layer
  const Network* owner = nullptr;
  std::uint64_t owner_id = 0;
};

/// Dense feed-forward network. Parameters live in one flat buffer laid out
/// layer by layer as [W (in x out, row-major), b (out)], so optimisers and
/// checkpoints can treat the whole net as a single contiguous block.
class Network {
 public:
  Network() = default;
  Network(std::size_t input_dim, const std::vector<std::pair<std::size_t, Activation>>& layers);

  /// ReLU on every hidden width, Identity on the output layer.
  static Network mlp(std::size_t input_dim, std::span<const std::size_t> hidden, std::size_t output_dim);

  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const { return layers_.empty() ? input_dim_ : layers_.back().out; }
  const std::vector<LayerShape>& layers() const { return layers_; }
  std::size_t parameter_count() const { return params_.size(); }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  std::span<double> gradients() { return grads_; }
  std::span<const double> gradients() const { return grads_; }
  void zero_grad();

  Eigen::Map<Matrix> weight(std::size_t layer);
  Eigen::Map<const Matrix> weight(std::size_t layer) const;
  Eigen::Map<Vector> bias(std::size_t layer);
  Eigen::Map<const Vector> bias(std::size_t layer) const;

  /// Batched forward: one sample per row of `x`. Pass a cache to enable backward.
  Matrix forward(const Matrix& x, ForwardCache* cache = nullptr) const;
  Vector forward(const Vector& x) const;

  /// Accumulates parameter gradients (+=) and returns d loss / d input.
  Matrix backward(const ForwardCache& cache, const Matrix& grad_output);

  /// Orthogonal initialisation; `hidden_gain` for ReLU layers, `output_gain` for the last layer.
  void init_orthogonal(Rng& rng, double hidden_gain, double output_gain);

 private:
  void layout();

  std::size_t input_dim_ = 0;
  std::vector<LayerShape> layers_;
  std::vector<std::size_t> offsets_;
  // Over-aligned so Eigen's vectorised kernels see the same alignment on
  // every run; summation order (and so the low bits) depends on it.
  std::vector<double, Eigen::aligned_allocator<double>> params_;
  std::vector<double, Eigen::aligned_allocator<double>> grads_;
  std::uint64_t id_ = 0;
};

std::string describe(const Network& net);

}  // namespace aed
