#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>

#include "aed/rl/mlp_policy.hpp"
#include "aed/rl/ppo.hpp"
#include "aed/rl/rollout.hpp"
#include "aed/user/pointing.hpp"

namespace aed {

/// Decides the next intent from the simulator state, the belief and the
/// encoded controller input. Only oracle controllers look at the true state.
using IntentFn =
    std::function<Intent(const PointingState& s, const Belief& b, std::span<const double> input, Rng& rng)>;

IntentFn policy_controller(const MlpPolicy& policy, Study study, SampleMode mode);
IntentFn random_controller(Study study);
/// Aims at the true target centre; presses the key once inside (Study 3).
IntentFn oracle_controller(Study study);

/// Runs one user episode from a fresh reset. `angle` defaults to a uniform draw.
EpisodeTrace run_episode(const IntentFn& controller, const PointingConfig& cfg, const Design& design,
                         const UserParams& params, Rng& rng, std::optional<double> angle = std::nullopt);

/// RL environment for Phase-1 training: each episode draws a design
/// uniformly from the design space and user parameters from the prior.
class PointingTrainEnv {
 public:
  using Observation = Vector;
  PointingTrainEnv(const PointingConfig& cfg, const Prior& prior, std::uint64_t seed);
  Observation reset();
  StepResult<Observation> step(const Vector& action);
  Vector supervision_target() const { return {}; }

  const PointingState& state() const { return state_; }
  const UserParams& params() const { return params_; }

 private:
  Observation encode() const;
  PointingConfig cfg_;
  Prior prior_;
  Rng rng_;
  PointingState state_;
  Belief belief_;
  UserParams params_;
};

/// A trained ensemble controller together with the simulator settings and
/// prior it was trained over.
struct UserModel {
  MlpPolicy policy;
  PointingConfig config;
  Prior prior;
  SampleMode mode = SampleMode::Deterministic;

  IntentFn controller() const { return policy_controller(policy, config.study, mode); }
};

MlpPolicyDims default_controller_dims(Study study);

struct EnsembleTrainingConfig {
  PointingConfig pointing;
  Prior prior;
  PpoConfig ppo;
  MlpPolicyDims dims;
  std::uint64_t seed = 1;
  int workers = 1;
  std::ostream* metrics = nullptr;
};

/// Phase 1: trains one controller over the whole prior (parameters are
/// controller inputs). Throws TrainingError on divergence.
UserModel train_ensemble(const EnsembleTrainingConfig& cfg);

nlohmann::json to_json(const PointingConfig& cfg);
PointingConfig pointing_config_from_json(const nlohmann::json& j, const PointingConfig& base);

void save_user_model(const UserModel& model, const std::filesystem::path& path);
UserModel load_user_model(const std::filesystem::path& path);

}  // namespace aed
