#include "aed/demos/gp.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

namespace aed {
namespace {

Matrix grid_kernel(const GpConfig& cfg, const std::vector<double>& g) {
  const auto n = static_cast<Eigen::Index>(g.size());
  Matrix k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) k(i, j) = gp_kernel(cfg, g[static_cast<std::size_t>(i)], g[static_cast<std::size_t>(j)]);
  return k;
}

Matrix cholesky_with_jitter(const GpConfig& cfg) {
  const auto g = gp_grid(cfg);
  const Matrix k = grid_kernel(cfg, g);
  const auto n = k.rows();
  for (double jitter = 1e-12; jitter <= 1e-6 * (1 + 1e-9); jitter *= 10.0) {
    Eigen::LLT<Matrix> llt(k + jitter * cfg.variance * Matrix::Identity(n, n));
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  throw std::runtime_error("gp_sample: kernel matrix is not positive definite even with jitter 1e-6");
}

}  // namespace

void validate(const GpConfig& c) {
  if (!(c.lengthscale > 0.0)) throw std::invalid_argument("gp.lengthscale: must be > 0");
  if (!(c.variance >= 0.0)) throw std::invalid_argument("gp.variance: must be >= 0");
  if (!(c.noise > 0.0)) throw std::invalid_argument("gp.noise: must be > 0");
  if (c.grid_intervals < 1) throw std::invalid_argument("gp.grid_intervals: must be positive");
  if (c.probes < 1) throw std::invalid_argument("gp.probes: must be positive");
}

nlohmann::json to_json(const GpConfig& c) {
  return {{"lengthscale", c.lengthscale},
          {"variance", c.variance},
          {"noise", c.noise},
          {"grid_intervals", c.grid_intervals},
          {"probes", c.probes}};
}

GpConfig gp_config_from_json(const nlohmann::json& j, const GpConfig& base) {
  GpConfig c = base;
  for (const auto& [k, v] : j.items()) {
    if (k == "lengthscale") c.lengthscale = v.get<double>();
    else if (k == "variance") c.variance = v.get<double>();
    else if (k == "noise") c.noise = v.get<double>();
    else if (k == "grid_intervals") c.grid_intervals = v.get<std::size_t>();
    else if (k == "probes") c.probes = v.get<std::size_t>();
    else throw std::invalid_argument("gp: unknown key '" + k + "'");
  }
  validate(c);
  return c;
}

std::vector<double> gp_grid(const GpConfig& cfg) {
  std::vector<double> g(cfg.grid_intervals + 1);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<double>(i) / static_cast<double>(cfg.grid_intervals);
  return g;
}

double gp_kernel(const GpConfig& cfg, double a, double b) {
  const double d = (a - b) / cfg.lengthscale;
  return cfg.variance * std::exp(-0.5 * d * d);
}

Vector gp_sample(const GpConfig& cfg, Rng& rng) {
  validate(cfg);
  const auto n = static_cast<Eigen::Index>(cfg.grid_intervals + 1);
  if (cfg.variance == 0.0) return Vector::Zero(n);
  const Matrix l = cholesky_with_jitter(cfg);
  Vector z(n);
  for (auto& v : z) v = standard_normal(rng);
  return l * z;
}

GpPosterior gp_posterior(const GpConfig& cfg, std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("gp_posterior: xs and ys differ in length");
  const auto g = gp_grid(cfg);
  const auto G = static_cast<Eigen::Index>(g.size());
  const auto n = static_cast<Eigen::Index>(xs.size());
  GpPosterior post{Vector::Zero(G), Vector::Constant(G, cfg.variance)};
  if (n == 0) return post;
  Matrix a(n, n), kg(G, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = gp_kernel(cfg, xs[static_cast<std::size_t>(i)], xs[static_cast<std::size_t>(j)]);
    a(i, i) += cfg.noise;
  }
  for (Eigen::Index r = 0; r < G; ++r)
    for (Eigen::Index j = 0; j < n; ++j) kg(r, j) = gp_kernel(cfg, g[static_cast<std::size_t>(r)], xs[static_cast<std::size_t>(j)]);
  const Eigen::LLT<Matrix> llt(a);
  const Vector y = Eigen::Map<const Vector>(ys.data(), n);
  post.mean = kg * llt.solve(y);
  const Matrix v = llt.matrixL().solve(kg.transpose());  // n x G
  post.variance = (cfg.variance - v.colwise().squaredNorm().transpose().array()).cwiseMax(0.0);
  return post;
}

Vector gp_posterior_variance(const GpConfig& cfg, std::span<const double> xs) {
  const std::vector<double> zeros(xs.size(), 0.0);
  return gp_posterior(cfg, xs, zeros).variance;
}

double imse(std::span<const double> v) {
  if (v.empty()) return 0.0;
  if (v.size() == 1) return v[0];
  const double h = 1.0 / static_cast<double>(v.size() - 1);
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) s += 0.5 * h * (v[i] + v[i + 1]);
  return s;
}

double imse(const Vector& v) { return imse(std::span<const double>(v.data(), static_cast<std::size_t>(v.size()))); }

double myopic_next_design(const GpConfig& cfg, std::span<const double> observed) {
  const auto g = gp_grid(cfg);
  std::vector<double> xs(observed.begin(), observed.end());
  xs.push_back(0.0);
  double best = std::numeric_limits<double>::infinity(), best_x = g.front();
  for (double x : g) {
    xs.back() = x;
    const double v = imse(gp_posterior_variance(cfg, xs));
    if (!std::isfinite(best) || v < best - 1e-12 * std::max(1.0, std::abs(best))) {
      best = v;
      best_x = x;
    }
  }
  return best_x;
}

std::vector<double> myopic_designs(const GpConfig& cfg) {
  std::vector<double> xs;
  for (std::size_t i = 0; i < cfg.probes; ++i) xs.push_back(myopic_next_design(cfg, xs));
  return xs;
}

double optimal_pair_imse(const GpConfig& cfg) {
  const auto g = gp_grid(cfg);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = i; j < g.size(); ++j) {
      const double xs[2] = {g[i], g[j]};
      best = std::min(best, imse(gp_posterior_variance(cfg, xs)));
    }
  }
  return best;
}

GpTask::GpTask(const GpConfig& cfg) : cfg_(cfg) {
  validate(cfg_);
  if (cfg_.variance > 0.0) chol_ = cholesky_with_jitter(cfg_);
}

double GpTask::snap(double x) const {
  const double n = static_cast<double>(cfg_.grid_intervals);
  return std::round(std::clamp(x, 0.0, 1.0) * n) / n;
}

double GpTask::l2(const Vector& f, const Vector& g) const { return imse((f - g).array().square().matrix().eval()); }

Vector GpTask::sample_latent(Rng& rng) const {
  const auto n = static_cast<Eigen::Index>(cfg_.grid_intervals + 1);
  if (cfg_.variance == 0.0) return Vector::Zero(n);
  Vector z(n);
  for (auto& v : z) v = standard_normal(rng);
  return chol_ * z;
}

EncodedRecord GpTask::run(const Vector& latent, const Vector& design, Rng& rng, nlohmann::json* outcome) const {
  const double x = snap(design[0]);
  const auto idx = static_cast<Eigen::Index>(std::lround(x * static_cast<double>(cfg_.grid_intervals)));
  const double y = latent[idx] + std::sqrt(cfg_.noise) * standard_normal(rng);
  if (outcome != nullptr) *outcome = {{"x", x}, {"y", y}};
  EncodedRecord r;
  r.flat = Vector{{x, y, 1.0}};
  return r;
}

EncodedRecord GpTask::encode(const Vector& design, const nlohmann::json& outcome) const {
  EncodedRecord r;
  r.flat = Vector{{outcome.value("x", snap(design[0])), outcome.at("y").get<double>(), 1.0}};
  return r;
}

EncodedRecord GpTask::mask(const EncodedRecord& record) const {
  EncodedRecord m;
  m.flat = Vector{{record.flat[0], 0.0, 0.0}};
  return m;
}

double GpTask::reward(const Vector& latent, const Vector&, std::span<const RecordPtr> records) const {
  std::vector<double> xs, ys;
  for (const auto& r : records) {
    if (r->flat[2] == 0.0) continue;
    xs.push_back(r->flat[0]);
    ys.push_back(r->flat[1]);
  }
  return -l2(latent, gp_posterior(cfg_, xs, ys).mean);
}

nlohmann::json GpTask::describe() const { return {{"task", name()}, {"gp", to_json(cfg_)}}; }

}  // namespace aed
