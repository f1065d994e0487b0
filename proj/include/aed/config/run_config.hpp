#pragma once

#include <filesystem>
#include <string>

#include "aed/analyst/analyst_env.hpp"
#include "aed/analyst/pointing_task.hpp"
#include "aed/demos/demo.hpp"
#include "aed/user/user_model.hpp"

namespace aed {

enum class Profile { Desk, Paper };
std::string to_string(Profile p);
Profile profile_from_string(const std::string& s);

struct UserPhaseConfig {
  MlpPolicyDims dims;
  PpoConfig ppo;
};

struct AnalystPhaseConfig {
  SetPolicyDims dims;
  AnalystEnvConfig env;
  PpoConfig ppo;
  PointingTaskConfig task;
};

struct EvalConfig {
  std::size_t episodes = 1000;            // analyst evaluation batch
  std::size_t behaviour_episodes = 1000;  // per grid point
  std::size_t histogram_bins = 10;
  ParamId behaviour_param = ParamId::RhoOcular;
  std::vector<double> behaviour_grid;
  std::uint64_t seed = 2024;
};

/// Everything one study run needs. Every field has a default that depends
/// only on (study, profile); a config file overrides any subset.
struct RunConfig {
  Study study = Study::One;
  Profile profile = Profile::Desk;
  std::uint64_t seed = 1;
  int workers = 1;
  std::string out_dir = "runs";
  PointingConfig pointing;
  Prior prior;
  UserPhaseConfig user;
  AnalystPhaseConfig analyst;
  EvalConfig eval;
  DemoConfig demo;
};

RunConfig default_run_config(Study study, Profile profile);
nlohmann::json to_json(const RunConfig& cfg);
/// "study" and "profile" pick the defaults; every other key overrides them.
/// Unknown keys throw std::invalid_argument naming the key path.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig run_config_from_json(const nlohmann::json& j, const RunConfig& base);
/// Reads a JSON config file; throws std::invalid_argument on parse errors.
nlohmann::json read_config_file(const std::filesystem::path& path);

EnsembleTrainingConfig user_training_config(const RunConfig& cfg);
AnalystTrainingConfig analyst_training_config(const RunConfig& cfg, const ExperimentTask& task);

}  // namespace aed
