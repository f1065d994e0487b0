#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "aed/numerics/rng.hpp"
#include "aed/user/params.hpp"

namespace aed {

/// Experiment design chosen by the analyst.
struct Design {
  double distance = 0.5;  // target distance from the origin
  double width = 0.1;     // target width (diameter)
};

struct DesignSpace {
  Range distance{0.1, 1.0};
  Range width{0.02, 0.3};
  bool contains(const Design& d) const;
  Design clip(const Design& d) const;
  Design sample(Rng& rng) const;
};

struct PointingConfig {
  Study study = Study::One;
  int max_steps = 20;
  double termination_penalty = -5.0;
  // Detection probability logistic(kappa0 + kappa_w * w - kappa_e * eccentricity).
  double kappa0 = 2.0;
  double kappa_w = 8.0;
  double kappa_e = 4.0;
  double sigma_floor = 1e-4;
  DesignSpace design_space;
};

class StepError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct PointingState {
  double fx = 0.0, fy = 0.0;  // fixation
  double tx = 0.0, ty = 0.0;  // target centre
  double w = 0.1;
  int step = 0;
  bool terminated = false;
};

struct PointingObservation {
  double x = 0.0, y = 0.0, w = 0.0;  // perceived target; meaningful only when detected
  double aim_x = 0.0, aim_y = 0.0;   // executed aim point
  bool detected = false;
  std::array<double, 3> variance{};  // σ_o², σ_o², σ_w² of this observation
};

/// Per-component Gaussian posterior over (t_x, t_y, w).
struct Belief {
  std::array<double, 3> mean{};
  std::array<double, 3> var{};
  bool detected = false;
};

/// What the controller decides each step.
struct Intent {
  double aim_x = 0.0, aim_y = 0.0;
  bool keypress = false;
};

struct StepOutcome {
  PointingObservation obs;
  double reward = 0.0;
  bool done = false;
  double amplitude = 0.0;  // executed movement distance
  double duration = 0.0;   // θ_a · amplitude + θ_b (0 for a keypress)
  bool keypress = false;
  bool success = false;    // episode ended with gaze inside the target
};

/// Places the target at `design.distance` along `angle`, clipped to the
/// display. Distances are checked against the display, not the analyst's
/// design space: distance in [0, 1], width in (0, 1].
PointingState reset_at(const Design& design, double angle);
PointingState reset(const Design& design, const UserParams& params, Rng& rng);

double eccentricity(const PointingState& s);
bool inside_target(const PointingState& s);
double perceptual_sigma(const PointingConfig& cfg, const UserParams& p, double ecc, double w);
double detection_prob(const PointingConfig& cfg, const PointingState& s);

/// One saccade (or keypress). Fixation ~ N(aim, (ρ_ocular·‖aim − f‖)² I),
/// clipped to the display; then a foveated observation from the new fixation.
StepOutcome step(const PointingConfig& cfg, PointingState& s, const Intent& intent, const UserParams& p, Rng& rng);

/// Kalman fusion of a detected observation; undetected observations return
/// the belief unchanged.
Belief belief_update(const Belief& b, const PointingObservation& obs);

/// Controller input layout (width kControllerInputDim):
///   0-1   fixation
///   2-3   belief mean minus fixation (0 before detection)
///   4-6   belief mean (t_x, t_y, w)
///   7-9   belief std (1.0 sentinel before detection)
///   10    detected flag
///   11    step / max_steps
///   12-15 ρ_ocular, ρ_spatial, 10·θ_b, θ_pref
inline constexpr std::size_t kControllerInputDim = 16;
inline constexpr double kEmptyBeliefStd = 1.0;

std::vector<double> controller_input(const Belief& b, const PointingState& s, const UserParams& p,
                                     const PointingConfig& cfg);

/// Action dimension of the controller: 2 (aim), plus a keypress logit in Study 3.
std::size_t controller_action_dim(Study study);

/// Maps a raw policy action to an intent. With a belief the aim is
/// f + v(1 + u0/2) + perp(v)·u1/2 with v = belief − f, otherwise f + u/2.
/// Components are clipped to [−1, 1]; in Study 3 u2 > 0 presses the key.
Intent intent_from_action(std::span<const double> u, const PointingState& s, const Belief& b, Study study);

struct EpisodeTrace {
  Design design;
  double angle = 0.0;
  double target_x = 0.0, target_y = 0.0;
  std::vector<std::array<double, 2>> fixations;  // executed fixations, origin excluded
  std::vector<double> durations;                 // one per fixation
  std::vector<std::uint8_t> detected;            // one per fixation
  std::optional<int> keypress_step;
  double total_time = 0.0;
  double total_reward = 0.0;
  bool success = false;
  bool truncated = false;  // max steps reached
  int steps = 0;           // controller decisions, including a keypress
};

nlohmann::json to_json(const EpisodeTrace& t, const std::string& params_id = "");
EpisodeTrace trace_from_json(const nlohmann::json& j);

}  // namespace aed
