#pragma once

#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "aed/analyst/record.hpp"
#include "aed/numerics/rng.hpp"
#include "aed/user/params.hpp"

namespace aed {

/// An experimental-design problem as the analyst sees it. The latent is the
/// task's ground truth for one episode (user parameters, a sampled function,
/// a scalar), stored as a raw vector. Estimates live in normalised [0, 1]
/// units; `estimate_dim` may be 0 when the task scores something other than
/// a learned estimate.
class ExperimentTask {
 public:
  virtual ~ExperimentTask() = default;

  virtual std::string name() const = 0;
  virtual std::size_t design_dim() const = 0;
  virtual Range design_range(std::size_t i) const = 0;
  virtual std::size_t estimate_dim() const = 0;
  virtual RecordLayout layout() const = 0;

  virtual Vector sample_latent(Rng& rng) const = 0;
  /// Regression target for the estimate block (normalised; empty when
  /// estimate_dim is 0).
  virtual Vector target(const Vector& latent) const = 0;

  /// Runs one experiment at `design`. When `outcome` is given it receives
  /// the raw outcome, which `encode` maps back to the same record.
  virtual EncodedRecord run(const Vector& latent, const Vector& design, Rng& rng,
                            nlohmann::json* outcome = nullptr) const = 0;
  virtual EncodedRecord encode(const Vector& design, const nlohmann::json& outcome) const = 0;
  /// The record with its outcome hidden (designs stay visible).
  virtual EncodedRecord mask(const EncodedRecord& record) const = 0;

  /// Per-step reward given the memory after the step and the estimate read
  /// from it. Always <= 0.
  virtual double reward(const Vector& latent, const Vector& estimate, std::span<const RecordPtr> records) const = 0;

  /// Normalised estimate -> raw parameter units, and the inverse for truths.
  virtual Vector denormalise(const Vector& estimate) const { return estimate; }
  virtual Vector normalised_truth(const Vector& latent) const { return target(latent); }

  virtual nlohmann::json describe() const = 0;
};

/// Negative L1 distance in normalised units. Throws on a length mismatch.
double discrepancy(std::span<const double> truth, std::span<const double> estimate);

}  // namespace aed
