#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "aed/config/run_config.hpp"

using namespace aed;
using nlohmann::json;

namespace {

std::string error_of(const json& j) {
  try {
    run_config_from_json(j);
  } catch (const std::invalid_argument& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("paper profile carries the appendix budgets") {
  const RunConfig u = default_run_config(Study::Two, Profile::Paper);
  CHECK(u.user.ppo.total_steps == 3'000'000);
  CHECK(u.user.ppo.learning_rate == 2e-4);
  CHECK(u.user.ppo.gamma == 0.99);
  CHECK(u.user.ppo.clip_range == 0.18);
  CHECK(u.user.ppo.ent_coef == 0.001);
  CHECK(u.user.ppo.max_grad_norm == 0.55);
  CHECK(u.analyst.ppo.total_steps == 4'000'000);
  CHECK(u.analyst.ppo.learning_rate == 5e-5);
  CHECK(u.analyst.ppo.clip_range == 0.10);
  CHECK(u.analyst.ppo.ent_coef == 0.01);
  CHECK(u.analyst.ppo.max_grad_norm == 0.55);
  CHECK(u.analyst.ppo.lr_decay < 1.0);
  CHECK(u.analyst.dims.encoder == std::vector<std::size_t>{32, 64, 128, 256});
  CHECK(u.analyst.dims.trunk == std::vector<std::size_t>{256, 64});
  CHECK(u.analyst.dims.head == std::vector<std::size_t>{64, 64});
  CHECK(u.analyst.dims.architecture == Architecture::Relational);
  CHECK(default_run_config(Study::One, Profile::Paper).analyst.dims.architecture == Architecture::Pooled);
}

TEST_CASE("analyst decay reaches a tenth of the start rate") {
  const RunConfig c = default_run_config(Study::One, Profile::Paper);
  const PpoConfig& p = c.analyst.ppo;
  const double iters = std::ceil(static_cast<double>(p.total_steps) / static_cast<double>(p.n_steps * p.n_envs));
  CHECK(std::pow(p.lr_decay, iters) == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("desk profile is smaller than paper") {
  for (Study s : {Study::One, Study::Two, Study::Three}) {
    const RunConfig d = default_run_config(s, Profile::Desk);
    const RunConfig p = default_run_config(s, Profile::Paper);
    CHECK(d.user.ppo.total_steps < p.user.ppo.total_steps);
    CHECK(d.analyst.ppo.total_steps < p.analyst.ppo.total_steps);
    CHECK(d.eval.episodes == 1000);
    CHECK(d.analyst.ppo.segment_length == d.analyst.env.experiments);
    CHECK(d.eval.behaviour_grid.size() >= 2);
    CHECK(d.pointing.study == s);
  }
}

TEST_CASE("config JSON round trip") {
  for (Study s : {Study::One, Study::Two, Study::Three}) {
    for (Profile pr : {Profile::Desk, Profile::Paper}) {
      RunConfig c = default_run_config(s, pr);
      c.seed = 77;
      c.analyst.env.mask_outcomes = true;
      c.user.ppo.learning_rate = 1.5e-4;
      const json j = to_json(c);
      const RunConfig back = run_config_from_json(j);
      CHECK(to_json(back) == j);
      CHECK(back.seed == 77);
      CHECK(back.analyst.env.mask_outcomes);
    }
  }
}

TEST_CASE("partial overrides keep the defaults") {
  const RunConfig c = run_config_from_json(json{{"study", 3}, {"analyst", {{"ppo", {{"learning_rate", 1e-4}}}}}});
  const RunConfig d = default_run_config(Study::Three, Profile::Desk);
  CHECK(c.analyst.ppo.learning_rate == 1e-4);
  CHECK(c.analyst.ppo.total_steps == d.analyst.ppo.total_steps);
  CHECK(c.user.ppo.total_steps == d.user.ppo.total_steps);
  CHECK(c.eval.behaviour_param == ParamId::ThetaPref);
}

TEST_CASE("unknown keys are rejected by name") {
  CHECK(error_of(json{{"bogus", 1}}).find("'bogus'") != std::string::npos);
  CHECK(error_of(json{{"user", {{"ppo", {{"lrate", 1}}}}}}).find("lrate") != std::string::npos);
  CHECK(error_of(json{{"user", {{"ppo", {{"lrate", 1}}}}}}).rfind("user", 0) == 0);
  CHECK(error_of(json{{"analyst", {{"env", {{"m", 3}}}}}}).find("'m'") != std::string::npos);
  CHECK(error_of(json{{"analyst", {{"network", {{"depth", 3}}}}}}).find("depth") != std::string::npos);
  CHECK(error_of(json{{"eval", {{"bins", 3}}}}).find("bins") != std::string::npos);
  CHECK(error_of(json{{"prior", {{"rho_nothing", {0, 1}}}}}).find("rho_nothing") != std::string::npos);
  CHECK(error_of(json{{"profile", "laptop"}}).find("profile") != std::string::npos);
  CHECK(error_of(json{{"study", 4}}) != "");
  CHECK(error_of(json{{"workers", 0}}).find("workers") != std::string::npos);
  CHECK(error_of(json{{"user", {{"ppo", {{"gamma", 1.0}}}}}}) != "");
  CHECK(error_of(json::array()) != "");
}

TEST_CASE("read_config_file") {
  const auto path = std::filesystem::temp_directory_path() / "aed_test_config.json";
  {
    std::ofstream f(path);
    f << R"({"study": 2, "seed": 5})";
  }
  const RunConfig c = run_config_from_json(read_config_file(path));
  CHECK(c.study == Study::Two);
  CHECK(c.seed == 5);
  {
    std::ofstream f(path);
    f << "{oops";
  }
  CHECK_THROWS_AS(read_config_file(path), std::invalid_argument);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_config_file(path), std::invalid_argument);
}

TEST_CASE("training configs follow the run config") {
  const RunConfig c = default_run_config(Study::Two, Profile::Desk);
  const EnsembleTrainingConfig u = user_training_config(c);
  CHECK(u.ppo.total_steps == c.user.ppo.total_steps);
  CHECK(u.pointing.study == Study::Two);
  CHECK(u.seed == c.seed);
}
