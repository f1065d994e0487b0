#pragma once

#include <cstddef>
#include <span>

#include <nlohmann/json.hpp>

namespace aed {

/// Sample mean with standard error std / sqrt(n), std taken with divisor n
/// (0 when n < 2).
struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;

  double lo(double k = 2.0) const { return mean - k * stderr_; }
  double hi(double k = 2.0) const { return mean + k * stderr_; }
};

MeanStderr mean_stderr(std::span<const double> xs);
nlohmann::json to_json(const MeanStderr& m);

/// a's ±k·stderr band lies entirely below b's.
bool band_below(const MeanStderr& a, const MeanStderr& b, double k = 2.0);

}  // namespace aed
