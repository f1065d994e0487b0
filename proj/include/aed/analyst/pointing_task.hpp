#pragma once

#include <memory>

#include "aed/analyst/task.hpp"
#include "aed/user/user_model.hpp"

namespace aed {

/// Record layouts.
///
/// Study 1 (summary statistics, pooled), width 8:
///   distance, width, observed, movement time, final fixation x, y, target x, y
///
/// Studies 2-3 (fixation sequences, relational):
///   context, width 12: distance, width, observed, target x, y, fixations / max_steps,
///     success, keypress, movement time, first fixation x, y, 10 * first duration
///   pair, width 6: x_t, y_t, 10 * duration_t, x_{t+1}, y_{t+1}, 10 * duration_{t+1}
///
/// `observed` is 0 on masked records, whose outcome fields are zero.
inline constexpr std::size_t kSummaryRecordDim = 8;
inline constexpr std::size_t kContextDim = 12;
inline constexpr std::size_t kPairDim = 6;
inline constexpr double kDurationScale = 10.0;

struct PointingTaskConfig {
  // Additive Gaussian corruption of outcome fields; 0 keeps outcomes exact.
  double observation_noise = 0.0;
};

/// The pointing experiment: the latent is a full UserParams vector drawn from
/// the user model's prior; outcomes come from one episode of the frozen
/// controller in deterministic mode.
class PointingTask final : public ExperimentTask {
 public:
  PointingTask(std::shared_ptr<const UserModel> user, const PointingTaskConfig& cfg = {});

  std::string name() const override;
  std::size_t design_dim() const override { return 2; }
  Range design_range(std::size_t i) const override;
  std::size_t estimate_dim() const override { return mask_.size(); }
  RecordLayout layout() const override;

  Vector sample_latent(Rng& rng) const override;
  Vector target(const Vector& latent) const override;
  EncodedRecord run(const Vector& latent, const Vector& design, Rng& rng,
                    nlohmann::json* outcome = nullptr) const override;
  EncodedRecord encode(const Vector& design, const nlohmann::json& outcome) const override;
  EncodedRecord mask(const EncodedRecord& record) const override;
  double reward(const Vector& latent, const Vector& estimate, std::span<const RecordPtr> records) const override;
  Vector denormalise(const Vector& estimate) const override;
  nlohmann::json describe() const override;

  Study study() const { return user_->config.study; }
  const std::vector<ParamId>& estimated() const { return mask_; }
  const UserModel& user() const { return *user_; }
  const Prior& prior() const { return user_->prior; }

  /// Simulates at a fixed latent and returns the trace (what `run` encodes).
  EpisodeTrace simulate(const UserParams& params, const Design& design, Rng& rng) const;

 private:
  std::shared_ptr<const UserModel> user_;
  PointingTaskConfig cfg_;
  std::vector<ParamId> mask_;
  IntentFn controller_;
};

EncodedRecord encode_outcome(const EpisodeTrace& trace, Study study, int max_steps);

/// Inverse of the relational encoding: fixation coordinates and durations.
struct DecodedFixations {
  std::vector<std::array<double, 2>> fixations;
  std::vector<double> durations;
};
DecodedFixations decode_fixations(const EncodedRecord& record);

}  // namespace aed
