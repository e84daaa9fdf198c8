#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gamma.hpp"

namespace harmonica {

struct AdversarialStep {
  Vector point;
  double gamma = 0.0;        // gamma at the chosen point (max over candidates)
  std::int64_t label = 0;    // predicted label at the chosen point
  std::ptrdiff_t changed_coord = -1;  // one-hot balls only
  double delta = 0.0;        // one-hot: signed nominal step (+-r) on changed_coord; else step length
  std::size_t candidate_index = 0;
  std::vector<double> candidate_gammas;  // filled when record_candidates is set
};

struct AdversarialTrace {
  Vector origin;
  std::int64_t origin_label = 0;
  std::vector<AdversarialStep> steps;
  std::size_t requested_steps = 0;
  BallSpec spec;
  bool stable = true;

  std::int64_t final_label() const { return steps.empty() ? origin_label : steps.back().label; }
  const Vector& final_point() const { return steps.empty() ? origin : steps.back().point; }
};

struct SearchOptions {
  bool early_exit_on_flip = false;
  bool record_candidates = false;
  std::size_t jobs = 1;  // fan-out over candidate gammas within a step
  GammaOptions gamma;
};

/// Gamma-guided stochastic ascent: at every step, build the ball around the
/// current point, measure gamma at each ball point (each with its own ball of
/// the same spec) and move to the first point of maximal gamma. Sampled
/// schemes draw a fresh ball per step from (seed, step, candidate).
AdversarialTrace adversarial_search(const Model& model, std::span<const double> x, const BallSpec& spec,
                                    std::size_t steps, const OutputProjection& projection,
                                    const SearchOptions& options = {});

struct Sample {
  Vector x;
  std::optional<std::int64_t> label;
};

/// Per-sample record; (prob, gamma, stable) is the Gamma Map input.
struct SampleRecord {
  std::size_t index = 0;
  std::int64_t predicted_label = 0;
  std::optional<std::int64_t> true_label;
  double prob = 0.0;
  double gamma = 0.0;
  bool stable = true;
  double class_logit = 0.0;
  double mean_other_logit = 0.0;  // NaN for single-output models
  double mean_logit = 0.0;        // all-logit average
};

struct StabilityStats {
  std::int64_t class_id = 0;
  std::size_t count = 0;
  std::optional<double> accuracy_pct;
  double stability_pct = 0.0;
  double mean_gamma = 0.0;
  double mean_prob = 0.0;
  double predicted_stability = 0.0;  // mean of P * exp(-N gamma)
  double mean_class_logit = 0.0;
  double mean_other_logit = 0.0;
};

struct BatchOptions {
  std::size_t jobs = 1;  // traces run concurrently, one per worker
  bool lenient = false;
  bool early_exit_on_flip = false;
  GammaOptions gamma;
};

struct BatchResult {
  std::vector<StabilityStats> stats;  // sorted by class id
  std::vector<SampleRecord> records;
  std::vector<AdversarialTrace> traces;  // parallel to records
  std::size_t skipped = 0;
};

/// Seed used for sample i of a batch.
std::uint64_t sample_seed(std::uint64_t base, std::size_t index);

BatchResult batch_stability(const Model& model, std::span<const Sample> dataset, const BallSpec& spec,
                            std::size_t steps, const OutputProjection& projection,
                            const BatchOptions& options = {});

/// Groups records by predicted class.
std::vector<StabilityStats> aggregate_stats(std::span<const SampleRecord> records, std::size_t steps);

}  // namespace harmonica
