#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>

#include "aed/analyst/analyst_env.hpp"
#include "aed/analyst/pointing_task.hpp"

namespace httplib {
class Server;
}

namespace aed {

/// Malformed outcome payload; `field` is the JSON path of the offending key.
class SchemaError : public std::invalid_argument {
 public:
  SchemaError(std::string field, const std::string& msg)
      : std::invalid_argument(field + ": " + msg), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class ConflictError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Outcome payloads, display units [-1, 1] and seconds.
///
/// Study 1:    {"trial", "target": [x, y], "click": [x, y], "movement_time"}
/// Studies 2-3: {"trial", "target": [x, y], "fixations": [[x, y], ...],
///              "durations": [...], "movement_time", "success", "keypress"}
///
/// `trial` is the zero-based index of the experiment being reported.
EpisodeTrace trace_from_payload(Study study, const Design& design, const nlohmann::json& payload);
nlohmann::json payload_from_trace(Study study, const EpisodeTrace& trace, std::size_t trial);

/// A frozen analyst and the task it was trained on.
struct ServedModel {
  std::string id;
  std::shared_ptr<const PointingTask> task;
  std::shared_ptr<const SetPolicy> policy;
  AnalystEnvConfig env;
};

/// Loads `dir/user.ckpt` and `dir/analyst.ckpt`; throws CheckpointError.
ServedModel load_served_model(const std::string& id, const std::filesystem::path& dir);

struct ServeConfig {
  std::chrono::seconds idle_expiry{30 * 60};
  bool sample_actions = false;  // deterministic (mean) actions by default
  std::uint64_t seed = 0;       // only used when sampling
  std::optional<std::filesystem::path> export_dir;  // completed sessions, one JSON line per trial
};

/// In-memory session store. Policies are shared read-only; each session has
/// its own lock and at most one mutation in flight.
class SessionService {
 public:
  using Clock = std::function<std::chrono::steady_clock::time_point()>;

  explicit SessionService(ServeConfig cfg = {}, Clock clock = nullptr);

  void add_model(ServedModel model);
  std::vector<std::string> model_ids() const;

  /// {"session_id", "study", "checkpoint", "trial": 0, "design": {...}}
  nlohmann::json create_session(int study, const std::string& checkpoint);
  /// {"session_id", "trial", "done", "design" (absent when done), "estimate"}
  nlohmann::json submit_outcome(const std::string& session_id, const nlohmann::json& payload);
  /// {"session_id", "trial", "estimate": {"names", "normalised", "values"}}
  nlohmann::json get_estimate(const std::string& session_id);

  /// Drops sessions idle for longer than the expiry; returns how many.
  std::size_t expire();
  std::size_t session_count() const;

 private:
  struct Session {
    std::mutex mu;
    std::string id;
    const ServedModel* model = nullptr;
    AnalystEpisode episode;
    std::vector<EpisodeTrace> traces;
    Vector next_design;
    Vector estimate;
    Rng rng{0};
    std::chrono::steady_clock::time_point created, touched;
  };

  std::shared_ptr<Session> find(const std::string& id);
  nlohmann::json estimate_json(const Session& s) const;
  void export_session(const Session& s) const;

  ServeConfig cfg_;
  Clock clock_;
  std::map<std::string, ServedModel> models_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t counter_ = 0;
};

nlohmann::json design_json(const Vector& design);

/// Mounts the HTTP routes on `server`.
void mount_routes(httplib::Server& server, SessionService& service);

}  // namespace aed
