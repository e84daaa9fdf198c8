#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "geometry.hpp"

namespace harmonica {

/// Numerically stable softmax component (max-subtracted).
double softmax_prob(std::span<const double> logits, std::size_t class_index);

/// Two-parameter softmax: e^Lc / (e^Lc + (k - 1) e^Lbar).
double approx_prob(double class_logit, double mean_other_logit, std::size_t n_classes);

/// P * exp(-N gamma), clamped to (0, 1].
double predicted_stability(double class_prob, double gamma, double steps);

enum class LogitAverage { NonClass, All };

struct SoftmaxSummary {
  double class_logit = 0.0;
  double mean_logit = 0.0;
  double class_prob = 0.0;
  std::size_t n_classes = 0;
};

SoftmaxSummary softmax_summary(std::span<const double> logits, std::size_t class_index,
                               LogitAverage average = LogitAverage::NonClass);

// ---------------------------------------------------------------------------
// Gamma Map: (class probability, gamma) bins -> observed stability fraction

struct StabilityRecord {
  double prob = 0.0;
  double gamma = 0.0;
  bool stable = false;
};

struct GammaMapCell {
  std::size_t count = 0;
  std::size_t stable_count = 0;

  std::optional<double> fraction() const {
    if (count == 0) return std::nullopt;
    return static_cast<double>(stable_count) / static_cast<double>(count);
  }
};

/// Cells are stored probability-major: cell(p, g) = cells[p * gamma_bins() + g].
/// Values outside the edges fall into the first/last bin; an interior edge
/// belongs to the bin above it.
struct GammaMap {
  Vector prob_edges;
  Vector gamma_edges;
  std::vector<GammaMapCell> cells;

  std::size_t prob_bins() const { return prob_edges.size() - 1; }
  std::size_t gamma_bins() const { return gamma_edges.size() - 1; }
  const GammaMapCell& cell(std::size_t p, std::size_t g) const { return cells[p * gamma_bins() + g]; }
  std::size_t prob_bin(double prob) const;
  std::size_t gamma_bin(double gamma) const;
  std::size_t total() const;
  /// Adds another map's counts; edges must match.
  void merge(const GammaMap& other);
};

Vector uniform_edges(double lo, double hi, std::size_t bins);

GammaMap build_gamma_map(std::span<const StabilityRecord> records, Vector prob_edges, Vector gamma_edges);

/// Default binning: probability uniform on [0, 1], gamma uniform on
/// [0, 99th percentile of observed gamma].
GammaMap build_gamma_map(std::span<const StabilityRecord> records, std::size_t prob_bins = 10,
                         std::size_t gamma_bins = 10);

enum class LookupFallback { None, NearestNonEmpty };

/// Stability fraction of the cell holding (prob, gamma); nullopt for an empty
/// cell unless the nearest-non-empty fallback finds one (distance in bin
/// units, ties to the lowest (prob, gamma) index).
std::optional<double> lookup_stability(const GammaMap& map, double prob, double gamma,
                                       LookupFallback fallback = LookupFallback::None);

// ---------------------------------------------------------------------------
// Sharp-boundary band: average gamma of an indicator across a straight
// boundary, using the circle-average ball.

/// 2r/pi: gamma integrated across the band on a line normal to the boundary.
double boundary_band_integral(double r);
/// The same integral by adaptive Simpson quadrature of the arccos profile
/// on both sides of the boundary.
double boundary_band_integral_quadrature(double r);

/// 2r/(pi H): region average over a box of height H split by the boundary.
double boundary_band_average(double r, double height);
double boundary_band_average_quadrature(double r, double height);

}  // namespace harmonica
