#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "geometry.hpp"
#include "model.hpp"

namespace harmonica {

/// What to do with ball points outside a model's declared domain.
/// Auto clamps quantized (pixel) domains and skips points otherwise.
enum class DomainPolicy { Auto, Clamp, Skip };

struct GammaOptions {
  DomainPolicy domain_policy = DomainPolicy::Auto;
};

struct GammaResult {
  double gamma = 0.0;
  std::size_t ball_count = 0;
  double std_error = 0.0;  // 0 for exhaustive deterministic balls
};

/// |f(x) - mean of f over the ball|, on the projected output. The
/// class-logit projection is anchored at f(x).
GammaResult gamma_point(const Model& model, std::span<const double> x, const BallSpec& spec,
                        const OutputProjection& projection, const GammaOptions& options = {});

// ---------------------------------------------------------------------------
// Regions

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Grid nodes per dimension; a single node sits at the interval midpoint,
/// otherwise nodes include both ends. Flattened with the last dimension
/// varying fastest.
struct GridSampling {
  std::vector<std::size_t> counts;
};

struct MonteCarloSampling {
  std::size_t count = 1;
  std::uint64_t seed = 0;
};

struct PointSetSampling {
  std::vector<Vector> points;
};

struct RegionSpec {
  std::vector<Interval> bounds;  // may be empty for point sets
  std::variant<GridSampling, MonteCarloSampling, PointSetSampling> sampling;

  std::size_t dimension() const;
  std::size_t size() const;
  void validate() const;
  std::vector<Vector> sample_points() const;

  static RegionSpec grid(std::vector<Interval> bounds, std::vector<std::size_t> counts);
  static RegionSpec monte_carlo(std::vector<Interval> bounds, std::size_t count, std::uint64_t seed);
  static RegionSpec point_set(std::vector<Vector> points);
};

struct RunOptions {
  std::size_t jobs = 1;
  bool lenient = false;  // skip failing points instead of aborting
  GammaOptions gamma;
};

struct PointGamma {
  Vector point;
  GammaResult result;
  bool ok = true;
  std::string error;  // set when !ok
};

struct RegionResult {
  double mean_gamma = 0.0;
  double std_error = 0.0;  // stddev across points / sqrt(count)
  std::size_t count = 0;   // successful points
  std::size_t skipped = 0;
  std::vector<PointGamma> per_point;
};

/// Ball seed used for a region point: a function of the spec seed and the
/// point's coordinates only, so results do not depend on point order.
BallSpec spec_for_point(const BallSpec& spec, std::span<const double> point);

RegionResult gamma_region(const Model& model, const RegionSpec& region, const BallSpec& spec,
                          const OutputProjection& projection, const RunOptions& options = {});

struct GammaField {
  RegionSpec region;  // grid sampling
  std::vector<Vector> nodes;
  std::vector<double> values;  // NaN marks nodes skipped in lenient mode
  std::size_t skipped = 0;
};

GammaField gamma_field(const Model& model, const RegionSpec& region, const BallSpec& spec,
                       const OutputProjection& projection, const RunOptions& options = {});

struct SweepRow {
  double radius = 0.0;
  double mean_gamma = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
  std::size_t skipped = 0;
};

/// One region average per radius over a single shared set of sample points.
std::vector<SweepRow> radius_sweep(const Model& model, const RegionSpec& region,
                                   std::span<const double> radii, const BallSpec& spec_template,
                                   const OutputProjection& projection, const RunOptions& options = {});

/// Trapezoid-rule integral of gamma along the segment from -> to, using
/// `intervals` equal sub-intervals; the measure is arc length.
double gamma_line_integral(const Model& model, std::span<const double> from,
                           std::span<const double> to, std::size_t intervals, const BallSpec& spec,
                           const OutputProjection& projection, const RunOptions& options = {});

}  // namespace harmonica
