#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "aed/config/pipeline.hpp"
#include "aed/numerics/checkpoint.hpp"

using namespace aed;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_config(Study s, const fs::path& out) {
  RunConfig c = default_run_config(s, Profile::Desk);
  c.out_dir = out.string();
  c.user.dims.trunk = {8};
  c.user.dims.head = {8};
  c.user.ppo.n_envs = 2;
  c.user.ppo.n_steps = 32;
  c.user.ppo.total_steps = 128;
  c.user.ppo.epochs = 2;
  c.user.ppo.minibatch_size = 32;
  c.analyst.dims.encoder = {8};
  c.analyst.dims.global = {8};
  c.analyst.dims.trunk = {8};
  c.analyst.dims.head = {8};
  c.analyst.ppo.n_envs = 2;
  c.analyst.ppo.n_steps = 16;
  c.analyst.ppo.total_steps = 64;
  c.analyst.ppo.epochs = 2;
  c.analyst.ppo.minibatch_size = 16;
  c.eval.episodes = 40;
  c.eval.behaviour_episodes = 20;
  c.eval.behaviour_grid = {0.1, 0.3};
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("pipeline: reproducible training, baselines, evaluation tables") {
  const fs::path root = fs::temp_directory_path() / "aed_test_pipeline";
  fs::remove_all(root);
  const RunConfig cfg = tiny_config(Study::Two, root);
  const fs::path dir = study_dir(cfg);
  CHECK(dir == root / "study2");

  CHECK_THROWS_AS(pipeline_train_analyst(cfg, dir), CheckpointError);
  CHECK_THROWS_AS(pipeline_evaluate(cfg, dir), CheckpointError);

  pipeline_train_user(cfg, dir);
  const std::string log1 = slurp(dir / "user_metrics.tsv");
  pipeline_train_user(cfg, dir);
  CHECK(slurp(dir / "user_metrics.tsv") == log1);
  CHECK(fs::exists(dir / "user_config.json"));
  CHECK(run_config_from_json(nlohmann::json::parse(slurp(dir / "user_config.json"))).seed == cfg.seed);

  pipeline_train_analyst(cfg, dir);
  RunConfig rnd = cfg;
  rnd.analyst.env.random_designs = true;
  pipeline_train_analyst(rnd, dir);
  RunConfig masked = cfg;
  masked.analyst.env.mask_outcomes = true;
  pipeline_train_analyst(masked, dir);
  CHECK(load_analyst(dir / "analyst_random.ckpt").env.random_designs);
  CHECK(load_analyst(dir / "analyst_masked.ckpt").env.mask_outcomes);
  CHECK_FALSE(load_analyst(dir / "analyst.ckpt").env.random_designs);
  RunConfig both = cfg;
  both.analyst.env.random_designs = both.analyst.env.mask_outcomes = true;
  CHECK_THROWS_AS(pipeline_train_analyst(both, dir), std::invalid_argument);

  const auto s1 = pipeline_evaluate(cfg, dir);
  const std::string curves = slurp(dir / "curves.tsv");
  const auto s2 = pipeline_evaluate(cfg, dir);
  CHECK(s1 == s2);
  CHECK(slurp(dir / "curves.tsv") == curves);
  CHECK(s1["fits"].size() == 3);
  CHECK(s1["curves"]["optimised"].size() == cfg.analyst.env.experiments + 1);
  CHECK(s1["curves"]["random"].size() == cfg.analyst.env.experiments + 1);
  CHECK(s1["random_curve_source"] == "analyst_random.ckpt");
  CHECK(s1["behaviour"].size() == 2);
  for (const char* f : {"fits.tsv", "curves.tsv", "histograms.tsv", "behaviour.tsv", "estimates.tsv", "plots.json",
                        "summary.json", "eval_config.json"}) {
    CHECK(fs::exists(dir / f));
  }
  // one header plus one row per estimated parameter
  std::ifstream fits(dir / "fits.tsv");
  int lines = 0;
  for (std::string l; std::getline(fits, l);) ++lines;
  CHECK(lines == 4);

  RunConfig other = cfg;
  other.study = Study::One;
  other.pointing.study = Study::One;
  CHECK_THROWS_AS(pipeline_evaluate(other, dir), CheckpointError);
  fs::remove_all(root);
}
