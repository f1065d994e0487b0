#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "aed/numerics/rng.hpp"

namespace aed {

enum class Study : std::uint8_t { One = 1, Two = 2, Three = 3 };

Study study_from_int(int s);
inline int to_int(Study s) { return static_cast<int>(s); }

enum class ParamId : std::uint8_t { RhoOcular, RhoSpatial, RhoW, RhoB, SigmaW, ThetaA, ThetaB, ThetaPref, RMax };
inline constexpr std::size_t kNumParams = 9;

std::string_view param_name(ParamId id);
ParamId param_from_name(std::string_view name);

/// Latent per-user parameters of the pointing model.
struct UserParams {
  double rho_ocular = 0.2;   // motor noise std per unit amplitude
  double rho_spatial = 0.05; // perceptual noise slope in eccentricity
  double rho_w = 0.05;       // perceptual noise slope in width
  double rho_b = 0.01;       // perceptual noise intercept
  double sigma_w = 0.02;     // width observation noise
  double theta_a = 0.05;     // seconds per display unit
  double theta_b = 0.1;      // seconds per gaze
  double theta_pref = 0.5;   // speed-accuracy preference in [0, 1]
  double r_max = 10.0;

  double& operator[](ParamId id);
  double operator[](ParamId id) const;
  std::array<double, kNumParams> to_array() const;
  static UserParams from_array(const std::array<double, kNumParams>& a);
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
};

/// Independent uniform prior per parameter; a degenerate range fixes the value.
struct Prior {
  std::array<Range, kNumParams> ranges{};
  Range& operator[](ParamId id) { return ranges[static_cast<std::size_t>(id)]; }
  const Range& operator[](ParamId id) const { return ranges[static_cast<std::size_t>(id)]; }
};

/// Default prior for a study. Study 1 fixes ρ_spatial at `study1_spatial`.
Prior default_prior(Study study, double study1_spatial = 0.05);

/// Parameters the analyst must infer, in output order.
std::vector<ParamId> estimation_mask(Study study);

/// Throws std::invalid_argument on an inverted or non-finite range.
void validate(const Prior& prior);

/// Masked entries are drawn uniformly; the others are set to the midpoint of
/// their (normally degenerate) range.
UserParams sample_user_params(const Prior& prior, Rng& rng, Study study);

/// Maps masked parameters to [0, 1] by the prior range (degenerate ranges map to 0).
std::vector<double> normalise(const Prior& prior, std::span<const ParamId> mask, const UserParams& p);
double normalise(const Prior& prior, ParamId id, double value);
double denormalise(const Prior& prior, ParamId id, double unit);

nlohmann::json to_json(const Prior& prior);
/// Keys absent from `j` keep the value in `base`; unknown names are rejected.
Prior prior_from_json(const nlohmann::json& j, const Prior& base);
nlohmann::json to_json(const UserParams& p);
UserParams params_from_json(const nlohmann::json& j);

}  // namespace aed
