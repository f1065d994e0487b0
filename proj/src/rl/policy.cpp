#include "aed/rl/policy.hpp"

#include <stdexcept>

namespace aed {

std::size_t total_size(std::span<const ParameterBlock> blocks) {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.value.size();
  return n;
}

std::vector<double> flatten(std::span<const ParameterBlock> blocks) {
  std::vector<double> out;
  out.reserve(total_size(blocks));
  for (const auto& b : blocks) out.insert(out.end(), b.value.begin(), b.value.end());
  return out;
}

void assign(std::span<const ParameterBlock> blocks, std::span<const double> flat) {
  if (flat.size() != total_size(blocks)) {
    throw std::invalid_argument("assign: flat parameter vector has " + std::to_string(flat.size()) +
                                " entries, policy has " + std::to_string(total_size(blocks)));
  }
  std::size_t off = 0;
  for (const auto& b : blocks) {
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off), flat.begin() + static_cast<std::ptrdiff_t>(off + b.value.size()),
              b.value.begin());
    off += b.value.size();
  }
}

}  // namespace aed
