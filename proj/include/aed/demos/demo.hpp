#pragma once

#include <filesystem>
#include <ostream>
#include <string>

#include "aed/analyst/analyst_env.hpp"
#include "aed/demos/gp.hpp"
#include "aed/demos/logistic.hpp"
#include "aed/eval/stats.hpp"

namespace aed {

enum class DemoKind { Nonmyopic, Adaptivity };
std::string to_string(DemoKind k);
DemoKind demo_kind_from_string(const std::string& s);

struct DemoConfig {
  GpConfig gp;
  LogisticConfig logistic;
  SetPolicyDims nonmyopic_dims;
  SetPolicyDims adaptivity_dims;
  PpoConfig nonmyopic_ppo;
  PpoConfig adaptivity_ppo;
  std::size_t nonmyopic_episodes = 1000;
  std::size_t adaptivity_episodes = 10000;
  std::uint64_t seed = 7;
  int workers = 1;
};

/// Desk-scale defaults (small nets, budgets that fit a laptop core).
DemoConfig desk_demo_config();
/// Larger budgets in the spirit of the original runs.
DemoConfig paper_demo_config();
nlohmann::json to_json(const DemoConfig& cfg);
DemoConfig demo_config_from_json(const nlohmann::json& j, const DemoConfig& base);

struct NonmyopicEpisode {
  std::vector<double> analyst_designs;
  double analyst_l2 = 0.0;
  double analyst_imse = 0.0;
  double myopic_l2 = 0.0;
  double myopic_imse = 0.0;
};

struct NonmyopicReport {
  MeanStderr analyst_l2, analyst_imse, myopic_l2, myopic_imse;
  std::vector<double> myopic_designs;
  double optimal_imse = 0.0;
  std::vector<NonmyopicEpisode> episodes;
};

/// Both arms see the same sampled functions. The function estimate is the
/// GP posterior mean given each arm's own probes.
NonmyopicReport evaluate_nonmyopic(const SetPolicy& analyst, const GpTask& task, std::size_t episodes,
                                   std::uint64_t seed);

struct AdaptivityEpisode {
  double theta = 0.0;
  double adaptive = 0.0, non_adaptive = 0.0, random = 0.0;  // θ estimates
};

struct AdaptivityReport {
  MeanStderr adaptive, non_adaptive, random;  // squared error in θ units
  std::vector<AdaptivityEpisode> episodes;
};

/// Final-step estimates from the three analysts on the same θ draws. The
/// non-adaptive analyst sees outcomes only after its last trial; the random
/// one ignores its design head.
AdaptivityReport evaluate_adaptivity(const SetPolicy& adaptive, const SetPolicy& non_adaptive,
                                     const SetPolicy& random, const LogisticTask& task, std::size_t episodes,
                                     std::uint64_t seed);

/// Trains the analysts a demo needs and writes them to `dir`
/// (nonmyopic.ckpt, or adaptive/non_adaptive/random.ckpt).
void train_demo(DemoKind kind, const DemoConfig& cfg, const std::filesystem::path& dir,
                std::ostream* log = nullptr);

/// Loads the checkpoints from `dir`, evaluates, and writes metrics.tsv and
/// episodes.tsv there. Throws CheckpointError when one is missing.
nlohmann::json run_demo(DemoKind kind, const DemoConfig& cfg, const std::filesystem::path& dir);

}  // namespace aed
