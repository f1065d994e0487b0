#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>

#include "aed/analyst/set_policy.hpp"
#include "aed/analyst/task.hpp"
#include "aed/rl/ppo.hpp"
#include "aed/rl/rollout.hpp"
#include "aed/rl/trainer.hpp"

namespace aed {

struct AnalystEnvConfig {
  std::size_t experiments = 4;  // M
  // Non-adaptive condition: outcomes stay hidden until the episode's last
  // experiment has run.
  bool mask_outcomes = false;
  // Random-design condition: the action is ignored and designs are drawn
  // uniformly from the design space.
  bool random_designs = false;
};

/// Next design (raw design units) and current estimate (normalised units).
struct AnalystAction {
  Vector design;
  Vector estimate;
};

struct ExperimentLog {
  Vector design;
  nlohmann::json outcome;  // null unless outcomes were requested
  bool clipped = false;    // design was outside the space and got clipped
};

/// One analyst episode. `latent` is privileged: it is never part of the
/// observation.
struct AnalystEpisode {
  Vector latent;
  std::vector<RecordPtr> records;  // true records
  std::vector<RecordPtr> visible;  // what the analyst observes
  std::vector<ExperimentLog> log;
  std::size_t experiments = 4;
  bool mask_outcomes = false;

  bool done() const { return records.size() >= experiments; }
  AnalystObservation observation() const { return {visible}; }
};

/// Logistic squash of raw policy outputs onto the design box.
Vector squash_design(const ExperimentTask& task, const Vector& raw);
/// Clips a design into the box; reports whether anything moved.
Vector clip_design(const ExperimentTask& task, const Vector& design, bool* clipped = nullptr);
Vector sample_design(const ExperimentTask& task, Rng& rng);

AnalystEpisode analyst_reset(const ExperimentTask& task, Rng& rng, const AnalystEnvConfig& cfg = {});

/// Runs one experiment at `design` (clipped into the space and flagged) and
/// appends it to the memory. Throws StepError once the episode is done.
void run_experiment(const ExperimentTask& task, AnalystEpisode& ep, const Vector& design, Rng& rng,
                    bool keep_outcome = false);
/// Same, with an outcome produced elsewhere (a live participant).
void append_outcome(const ExperimentTask& task, AnalystEpisode& ep, const Vector& design,
                    const nlohmann::json& outcome);

struct AnalystStepResult {
  AnalystObservation observation;
  double reward = 0.0;
  bool done = false;
};

/// Runs the action's design, then scores the action's estimate against the
/// latent with the task reward.
AnalystStepResult analyst_step(const ExperimentTask& task, AnalystEpisode& ep, const AnalystAction& action, Rng& rng);

struct AnalystDecision {
  AnalystAction action;
  Vector raw;  // pre-squash policy action
  double log_prob = 0.0;
  double value = 0.0;
};

/// Policy forward pass on the memory: squashed design, estimate clamped to [0, 1].
AnalystDecision analyst_act(const SetPolicy& policy, const ExperimentTask& task, const AnalystObservation& obs,
                            SampleMode mode, Rng& rng);
Vector analyst_estimate(const SetPolicy& policy, const AnalystObservation& obs);

/// A full episode of a frozen analyst. estimates[k] is read from the memory
/// after k experiments (k = 0..M); rewards score estimates[k + 1].
struct AnalystRollout {
  AnalystEpisode episode;
  std::vector<Vector> estimates;
  std::vector<double> rewards;
  double total_reward() const;
};

/// Designs come from the policy (mean action in deterministic mode) unless
/// cfg.random_designs is set.
AnalystRollout rollout_analyst(const SetPolicy& policy, const ExperimentTask& task, const AnalystEnvConfig& cfg,
                               Rng& rng, SampleMode mode = SampleMode::Deterministic, bool keep_outcomes = false);
/// Same, at a given latent.
AnalystRollout rollout_analyst_at(const SetPolicy& policy, const ExperimentTask& task, const AnalystEnvConfig& cfg,
                                  const Vector& latent, Rng& rng, SampleMode mode = SampleMode::Deterministic,
                                  bool keep_outcomes = false);

nlohmann::json to_json(const AnalystEnvConfig& cfg);
AnalystEnvConfig env_config_from_json(const nlohmann::json& j, const AnalystEnvConfig& base);

/// Analyst checkpoint: the policy plus the env settings and task description
/// it was trained with.
struct AnalystCheckpoint {
  SetPolicy policy;
  AnalystEnvConfig env;
  nlohmann::json task;
};
void save_analyst(const SetPolicy& policy, const ExperimentTask& task, const AnalystEnvConfig& env,
                  const std::filesystem::path& path);
/// Throws CheckpointError on a missing or malformed file.
AnalystCheckpoint load_analyst(const std::filesystem::path& path);
/// Throws CheckpointError when the checkpoint was trained on another task
/// or with another record layout.
void check_compatible(const AnalystCheckpoint& ckpt, const ExperimentTask& task);

/// RL wrapper used for training. The per-step reward scores the estimator's
/// (the EMA shadow's) estimate on the memory after the step.
class AnalystEnv {
 public:
  using Observation = AnalystObservation;

  AnalystEnv(std::shared_ptr<const ExperimentTask> task, const AnalystEnvConfig& cfg, std::uint64_t seed,
             const SetPolicy* estimator = nullptr);

  Observation reset();
  StepResult<Observation> step(const Vector& action);
  Vector supervision_target() const;

  const AnalystEpisode& episode() const { return ep_; }
  const ExperimentTask& task() const { return *task_; }

 private:
  std::shared_ptr<const ExperimentTask> task_;
  AnalystEnvConfig cfg_;
  Rng rng_;
  const SetPolicy* estimator_;
  AnalystEpisode ep_;
};

/// Dims for a task: action/estimate/layout filled in, widths left at defaults.
SetPolicyDims default_analyst_dims(const ExperimentTask& task, Architecture arch, std::size_t experiments);

struct AnalystTrainingConfig {
  SetPolicyDims dims;
  AnalystEnvConfig env;
  PpoConfig ppo;
  std::uint64_t seed = 1;
  int workers = 1;
  std::ostream* metrics = nullptr;
};

struct TrainedAnalyst {
  SetPolicy policy;
  SetPolicy shadow;
  TrainResult result;
};

/// Phase 2: PPO on the design head, pathwise regression on the estimate
/// head, EMA shadow for the rewards.
TrainedAnalyst train_analyst(std::shared_ptr<const ExperimentTask> task, const AnalystTrainingConfig& cfg);

}  // namespace aed
