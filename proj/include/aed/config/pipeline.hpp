#pragma once

#include <filesystem>

#include "aed/config/run_config.hpp"
#include "aed/eval/evaluation.hpp"

namespace aed {

/// Which analyst a checkpoint holds. Random-design and masked-outcome
/// analysts are the baselines.
enum class AnalystVariant { Optimised, RandomDesigns, MaskedOutcomes };
AnalystVariant variant_of(const AnalystEnvConfig& env);
std::string checkpoint_name(AnalystVariant v);  // analyst.ckpt, analyst_random.ckpt, analyst_masked.ckpt

/// out_dir / "study<N>"
std::filesystem::path study_dir(const RunConfig& cfg);
/// Writes `dir/name` with the full effective config.
void archive_config(const RunConfig& cfg, const std::filesystem::path& dir, const std::string& name = "config.json");

/// Phase 1. Writes user.ckpt and user_metrics.tsv; throws TrainingError.
UserModel pipeline_train_user(const RunConfig& cfg, const std::filesystem::path& dir);

/// Phase 2 for the variant selected by cfg.analyst.env. Needs dir/user.ckpt
/// (CheckpointError otherwise). Writes the analyst checkpoint and its
/// metrics log (analyst*_metrics.tsv).
TrainedAnalyst pipeline_train_analyst(const RunConfig& cfg, const std::filesystem::path& dir);

/// Evaluation tables for a trained study:
///   fits.tsv        one regression per estimated parameter (M experiments)
///   curves.tsv      optimised and random error curves
///   histograms.tsv  design histograms of the optimised analyst
///   behaviour.tsv   user-model behaviour across cfg.eval.behaviour_grid
///   estimates.tsv   truth/estimate pairs
///   plots.json, summary.json
/// The random curve uses analyst_random.ckpt when present, otherwise the
/// optimised analyst's estimate head fed uniform designs.
nlohmann::json pipeline_evaluate(const RunConfig& cfg, const std::filesystem::path& dir);

}  // namespace aed
