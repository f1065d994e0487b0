#include "aed/analyst/pointing_task.hpp"

#include <cmath>

namespace aed {
namespace {

UserParams params_of(const Vector& latent) {
  if (latent.size() != static_cast<Eigen::Index>(kNumParams)) {
    throw std::invalid_argument("pointing latent must have " + std::to_string(kNumParams) + " entries");
  }
  std::array<double, kNumParams> a{};
  for (std::size_t i = 0; i < kNumParams; ++i) a[i] = latent[static_cast<Eigen::Index>(i)];
  return UserParams::from_array(a);
}

void corrupt(EpisodeTrace& t, double sd, Rng& rng) {
  for (auto& f : t.fixations) {
    f[0] += sd * standard_normal(rng);
    f[1] += sd * standard_normal(rng);
  }
  for (auto& d : t.durations) d += sd * standard_normal(rng);
  t.total_time += sd * standard_normal(rng);
}

}  // namespace

EncodedRecord encode_outcome(const EpisodeTrace& t, Study study, int max_steps) {
  EncodedRecord r;
  const bool any = !t.fixations.empty();
  if (study == Study::One) {
    r.flat.resize(kSummaryRecordDim);
    r.flat << t.design.distance, t.design.width, 1.0, t.total_time, any ? t.fixations.back()[0] : 0.0,
        any ? t.fixations.back()[1] : 0.0, t.target_x, t.target_y;
    return r;
  }
  r.flat.resize(kContextDim);
  r.flat << t.design.distance, t.design.width, 1.0, t.target_x, t.target_y,
      static_cast<double>(t.fixations.size()) / static_cast<double>(max_steps), t.success ? 1.0 : 0.0,
      t.keypress_step ? 1.0 : 0.0, t.total_time, any ? t.fixations[0][0] : 0.0, any ? t.fixations[0][1] : 0.0,
      any && !t.durations.empty() ? kDurationScale * t.durations[0] : 0.0;
  const auto n = static_cast<Eigen::Index>(t.fixations.size());
  r.pairs.resize(std::max<Eigen::Index>(0, n - 1), static_cast<Eigen::Index>(kPairDim));
  auto dur = [&](std::size_t i) { return i < t.durations.size() ? kDurationScale * t.durations[i] : 0.0; };
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    const auto i = static_cast<std::size_t>(k);
    r.pairs.row(k) << t.fixations[i][0], t.fixations[i][1], dur(i), t.fixations[i + 1][0], t.fixations[i + 1][1],
        dur(i + 1);
  }
  return r;
}

DecodedFixations decode_fixations(const EncodedRecord& r) {
  DecodedFixations d;
  if (r.flat.size() != static_cast<Eigen::Index>(kContextDim)) {
    throw std::invalid_argument("decode_fixations: not a fixation-sequence record");
  }
  if (r.flat[2] == 0.0) return d;  // masked
  if (r.pairs.rows() == 0) {
    if (r.flat[5] > 0.0) {
      d.fixations.push_back({r.flat[9], r.flat[10]});
      d.durations.push_back(r.flat[11] / kDurationScale);
    }
    return d;
  }
  d.fixations.push_back({r.pairs(0, 0), r.pairs(0, 1)});
  d.durations.push_back(r.pairs(0, 2) / kDurationScale);
  for (Eigen::Index k = 0; k < r.pairs.rows(); ++k) {
    d.fixations.push_back({r.pairs(k, 3), r.pairs(k, 4)});
    d.durations.push_back(r.pairs(k, 5) / kDurationScale);
  }
  return d;
}

PointingTask::PointingTask(std::shared_ptr<const UserModel> user, const PointingTaskConfig& cfg)
    : user_(std::move(user)), cfg_(cfg) {
  if (!user_) throw std::invalid_argument("PointingTask: a user model is required");
  if (!(cfg_.observation_noise >= 0.0)) throw std::invalid_argument("PointingTask: observation_noise must be >= 0");
  validate(user_->prior);
  mask_ = estimation_mask(user_->config.study);
  controller_ = user_->controller();
}

std::string PointingTask::name() const { return "pointing-study" + std::to_string(to_int(study())); }

Range PointingTask::design_range(std::size_t i) const {
  const DesignSpace& ds = user_->config.design_space;
  if (i == 0) return ds.distance;
  if (i == 1) return ds.width;
  throw std::out_of_range("pointing designs have two components");
}

RecordLayout PointingTask::layout() const {
  if (study() == Study::One) return {kSummaryRecordDim, 0};
  return {kContextDim, kPairDim};
}

Vector PointingTask::sample_latent(Rng& rng) const {
  const auto a = sample_user_params(user_->prior, rng, study()).to_array();
  return Eigen::Map<const Vector>(a.data(), static_cast<Eigen::Index>(a.size()));
}

Vector PointingTask::target(const Vector& latent) const {
  const auto v = normalise(user_->prior, mask_, params_of(latent));
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

EpisodeTrace PointingTask::simulate(const UserParams& params, const Design& design, Rng& rng) const {
  return run_episode(controller_, user_->config, design, params, rng);
}

EncodedRecord PointingTask::run(const Vector& latent, const Vector& design, Rng& rng, nlohmann::json* outcome) const {
  EpisodeTrace t = simulate(params_of(latent), Design{design[0], design[1]}, rng);
  if (cfg_.observation_noise > 0.0) corrupt(t, cfg_.observation_noise, rng);
  if (outcome != nullptr) *outcome = to_json(t);
  return encode_outcome(t, study(), user_->config.max_steps);
}

EncodedRecord PointingTask::encode(const Vector& design, const nlohmann::json& outcome) const {
  EpisodeTrace t = trace_from_json(outcome);
  t.design = Design{design[0], design[1]};
  return encode_outcome(t, study(), user_->config.max_steps);
}

EncodedRecord PointingTask::mask(const EncodedRecord& record) const {
  EncodedRecord m;
  m.flat = Vector::Zero(record.flat.size());
  m.flat[0] = record.flat[0];
  m.flat[1] = record.flat[1];
  m.pairs.resize(0, record.pairs.cols());
  return m;
}

double PointingTask::reward(const Vector& latent, const Vector& estimate, std::span<const RecordPtr>) const {
  const Vector truth = target(latent);
  return discrepancy(std::span<const double>(truth.data(), static_cast<std::size_t>(truth.size())),
                     std::span<const double>(estimate.data(), static_cast<std::size_t>(estimate.size())));
}

Vector PointingTask::denormalise(const Vector& estimate) const {
  if (static_cast<std::size_t>(estimate.size()) != mask_.size()) {
    throw std::invalid_argument("estimate has " + std::to_string(estimate.size()) + " entries, expected " +
                                std::to_string(mask_.size()));
  }
  Vector raw(estimate.size());
  for (std::size_t i = 0; i < mask_.size(); ++i) {
    raw[static_cast<Eigen::Index>(i)] = aed::denormalise(user_->prior, mask_[i], estimate[static_cast<Eigen::Index>(i)]);
  }
  return raw;
}

nlohmann::json PointingTask::describe() const {
  nlohmann::json names = nlohmann::json::array();
  for (auto id : mask_) names.push_back(std::string(param_name(id)));
  return {{"task", name()},
          {"study", to_int(study())},
          {"estimated", names},
          {"prior", to_json(user_->prior)},
          {"design", {{"distance", {design_range(0).lo, design_range(0).hi}},
                      {"width", {design_range(1).lo, design_range(1).hi}}}},
          {"observation_noise", cfg_.observation_noise}};
}

}  // namespace aed
