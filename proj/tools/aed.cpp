// aed: command-line entry point for the three-phase pipeline, the demos,
// evaluation and the live session service.
#include <omp.h>

#include <csignal>
#include <iostream>

#include "aed/config/pipeline.hpp"
#include "aed/numerics/checkpoint.hpp"
#include "aed/serve/service.hpp"

#include <CLI11.hpp>
#include <httplib.h>

using namespace aed;

namespace {

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kCheckpoint = 3, kTraining = 4 };

struct Common {
  std::string config;
  std::optional<int> study;
  std::optional<std::string> profile;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out;
  bool random_designs = false;
  bool mask_outcomes = false;
};

void add_common(CLI::App* app, Common& c, bool analyst_flags) {
  app->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
  app->add_option("--study", c.study, "study {1,2,3}")->check(CLI::IsMember({1, 2, 3}));
  app->add_option("--profile", c.profile, "budget profile {paper,desk}")->check(CLI::IsMember({"paper", "desk"}));
  app->add_option("--seed", c.seed, "run seed");
  app->add_option("--workers", c.workers, "environment worker threads (default: cores - 1)")->check(CLI::PositiveNumber);
  app->add_option("--out", c.out, "output root (default runs)");
  if (analyst_flags) {
    app->add_flag("--random-designs", c.random_designs, "random-design baseline analyst");
    app->add_flag("--mask-outcomes", c.mask_outcomes, "non-adaptive analyst (outcomes hidden until the end)");
  }
}

// Flags override the file; the file overrides the (study, profile) defaults.
RunConfig resolve(const Common& c) {
  nlohmann::json j = c.config.empty() ? nlohmann::json::object() : read_config_file(c.config);
  if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
  if (c.study) j["study"] = *c.study;
  if (c.profile) j["profile"] = *c.profile;
  RunConfig cfg = run_config_from_json(j);
  if (c.seed) cfg.seed = *c.seed;
  if (c.out) cfg.out_dir = *c.out;
  if (c.workers) {
    cfg.workers = *c.workers;
  } else if (!j.contains("workers")) {
    cfg.workers = std::max(1, omp_get_num_procs() - 1);
  }
  if (c.random_designs) cfg.analyst.env.random_designs = true;
  if (c.mask_outcomes) cfg.analyst.env.mask_outcomes = true;
  variant_of(cfg.analyst.env);
  omp_set_num_threads(cfg.workers);
  return cfg;
}

int run_guarded(const std::function<void()>& f) {
  try {
    f();
    return kOk;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << '\n';
    return kCheckpoint;
  } catch (const TrainingError& e) {
    std::cerr << "training failed: " << e.what() << '\n';
    return kTraining;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
}

httplib::Server* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Amortised experimental design for pointing-user models"};
  app.require_subcommand(1);

  Common c;
  auto* train_user = app.add_subcommand("train-user", "Phase 1: train the ensemble user model");
  add_common(train_user, c, false);

  auto* train_analyst = app.add_subcommand("train-analyst", "Phase 2: train an analyst against the user model");
  add_common(train_analyst, c, true);

  auto* evaluate = app.add_subcommand("evaluate", "Fits, error curves, histograms and behaviour tables");
  add_common(evaluate, c, false);

  auto* demo = app.add_subcommand("demo", "Toy demonstrations (trains missing checkpoints, then evaluates)");
  std::string which;
  bool retrain = false;
  demo->add_option("which", which, "nonmyopic | adaptivity")->required()->check(CLI::IsMember({"nonmyopic", "adaptivity"}));
  demo->add_flag("--retrain", retrain, "train even when checkpoints exist");
  add_common(demo, c, false);

  auto* show = app.add_subcommand("config", "Print the effective config");
  add_common(show, c, true);

  auto* serve = app.add_subcommand("serve", "Run the live session service");
  std::string host = "127.0.0.1";
  int port = 8080;
  std::vector<std::string> models;
  bool sample = false;
  std::string export_dir;
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "port")->check(CLI::Range(1, 65535));
  serve->add_option("--model", models, "checkpoint id=run directory (holding user.ckpt, analyst.ckpt)")->required();
  serve->add_flag("--sample", sample, "sample actions instead of using the mean");
  serve->add_option("--export", export_dir, "write completed sessions here as trace lines");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  if (*train_user) {
    return run_guarded([&] {
      const RunConfig cfg = resolve(c);
      const auto dir = study_dir(cfg);
      const UserModel m = pipeline_train_user(cfg, dir);
      (void)m;
      std::cout << "wrote " << (dir / "user.ckpt").string() << '\n';
    });
  }
  if (*train_analyst) {
    return run_guarded([&] {
      const RunConfig cfg = resolve(c);
      const auto dir = study_dir(cfg);
      pipeline_train_analyst(cfg, dir);
      std::cout << "wrote " << (dir / checkpoint_name(variant_of(cfg.analyst.env))).string() << '\n';
    });
  }
  if (*evaluate) {
    return run_guarded([&] {
      const RunConfig cfg = resolve(c);
      const auto summary = pipeline_evaluate(cfg, study_dir(cfg));
      std::cout << summary["fits"].dump(2) << '\n';
    });
  }
  if (*demo) {
    return run_guarded([&] {
      const RunConfig cfg = resolve(c);
      const DemoKind kind = demo_kind_from_string(which);
      DemoConfig dc = cfg.demo;
      dc.seed = cfg.seed;
      dc.workers = cfg.workers;
      const auto dir = std::filesystem::path(cfg.out_dir) / ("demo-" + which);
      std::filesystem::create_directories(dir);
      archive_config(cfg, dir);
      const bool have = kind == DemoKind::Nonmyopic ? std::filesystem::exists(dir / "nonmyopic.ckpt")
                                                    : std::filesystem::exists(dir / "adaptive.ckpt") &&
                                                          std::filesystem::exists(dir / "non_adaptive.ckpt") &&
                                                          std::filesystem::exists(dir / "random.ckpt");
      if (retrain || !have) train_demo(kind, dc, dir, &std::cerr);
      std::cout << run_demo(kind, dc, dir).dump(2) << '\n';
    });
  }
  if (*show) {
    return run_guarded([&] { std::cout << to_json(resolve(c)).dump(2) << '\n'; });
  }
  if (*serve) {
    return run_guarded([&] {
      ServeConfig sc;
      sc.sample_actions = sample;
      if (!export_dir.empty()) sc.export_dir = export_dir;
      SessionService service(sc);
      for (const auto& spec : models) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0) throw std::invalid_argument("--model: expected id=directory");
        service.add_model(load_served_model(spec.substr(0, eq), spec.substr(eq + 1)));
      }
      httplib::Server server;
      mount_routes(server, service);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on " << host << ':' << port << '\n';
      if (!server.listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
    });
  }
  return kOther;
}
