#include "aed/eval/stats.hpp"

#include <algorithm>
#include <cmath>

namespace aed {

MeanStderr mean_stderr(std::span<const double> xs) {
  MeanStderr m;
  m.n = xs.size();
  if (xs.empty()) return m;
  if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs[0]; })) {
    m.mean = xs[0];
    return m;
  }
  double s = 0.0;
  for (double x : xs) s += x;
  m.mean = s / static_cast<double>(xs.size());
  if (xs.size() < 2) return m;
  double ss = 0.0;
  for (double x : xs) ss += (x - m.mean) * (x - m.mean);
  m.stderr_ = std::sqrt(ss / static_cast<double>(xs.size())) / std::sqrt(static_cast<double>(xs.size()));
  return m;
}

nlohmann::json to_json(const MeanStderr& m) { return {{"mean", m.mean}, {"stderr", m.stderr_}, {"n", m.n}}; }

bool band_below(const MeanStderr& a, const MeanStderr& b, double k) { return a.hi(k) < b.lo(k); }

}  // namespace aed
