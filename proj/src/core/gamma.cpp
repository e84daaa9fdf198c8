#include "gamma.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "error.hpp"
#include "parallel.hpp"
#include "seed.hpp"

namespace harmonica {
namespace {

std::string describe(std::span<const double> x) {
  std::ostringstream os;
  os << '(';
  const std::size_t shown = std::min<std::size_t>(x.size(), 6);
  for (std::size_t i = 0; i < shown; ++i) os << (i ? ", " : "") << x[i];
  if (x.size() > shown) os << ", ... [" << x.size() << " coords]";
  os << ')';
  return os.str();
}

DomainPolicy effective_policy(const Model& model, DomainPolicy policy) {
  if (policy != DomainPolicy::Auto) return policy;
  return model.domain() && model.domain()->quantized ? DomainPolicy::Clamp : DomainPolicy::Skip;
}

std::size_t worker_count(const Model& model, std::size_t jobs) {
  jobs = std::max<std::size_t>(jobs, 1);
  if (model.concurrency() > 0) jobs = std::min(jobs, model.concurrency());
  return jobs;
}

RegionResult region_over_points(const Model& model, std::vector<Vector> points, const BallSpec& spec,
                                const OutputProjection& projection, const RunOptions& options) {
  RegionResult out;
  out.per_point.resize(points.size());
  parallel_for(points.size(), worker_count(model, options.jobs), [&](std::size_t i) {
    PointGamma& slot = out.per_point[i];
    slot.point = std::move(points[i]);
    try {
      slot.result = gamma_point(model, slot.point, spec_for_point(spec, slot.point), projection, options.gamma);
    } catch (const Error& e) {
      if (!options.lenient)
        throw Error(e.code(), "region point " + std::to_string(i) + " " + describe(slot.point) + ": " + e.what());
      slot.ok = false;
      slot.error = e.what();
    }
  });

  double sum = 0.0;
  for (const PointGamma& p : out.per_point) {
    if (!p.ok) {
      ++out.skipped;
      continue;
    }
    sum += p.result.gamma;
    ++out.count;
  }
  if (out.count == 0) fail(ErrorCode::Backend, "no region point could be evaluated");
  out.mean_gamma = sum / static_cast<double>(out.count);
  if (out.count > 1) {
    double ss = 0.0;
    for (const PointGamma& p : out.per_point)
      if (p.ok) ss += (p.result.gamma - out.mean_gamma) * (p.result.gamma - out.mean_gamma);
    out.std_error = std::sqrt(ss / static_cast<double>(out.count - 1)) / std::sqrt(static_cast<double>(out.count));
  }
  return out;
}

}  // namespace

GammaResult gamma_point(const Model& model, std::span<const double> x, const BallSpec& spec,
                        const OutputProjection& projection, const GammaOptions& options) {
  spec.validate();
  validate_projection(projection, model.output_dim());
  if (x.size() != model.input_dim())
    fail(ErrorCode::InvalidDimension, "point has " + std::to_string(x.size()) + " coordinates, model expects " +
                                          std::to_string(model.input_dim()));

  std::vector<Vector> ball = ball_points(x, spec);
  if (const auto& domain = model.domain()) {
    const DomainPolicy policy = effective_policy(model, options.domain_policy);
    std::vector<Vector> kept;
    kept.reserve(ball.size());
    for (Vector& p : ball) {
      if (domain->contains(p)) {
        kept.push_back(std::move(p));
      } else if (policy == DomainPolicy::Clamp) {
        kept.push_back(domain->clamp(p));
      }
    }
    ball = std::move(kept);
  }
  if (ball.empty()) fail(ErrorCode::EmptyBall, "no ball point around " + describe(x) + " lies in the model domain");

  const Vector center_out = model.eval(x);
  std::vector<Vector> ball_out;
  try {
    ball_out = model.eval_batch(ball);
  } catch (const Error& e) {
    throw Error(e.code(), "ball around " + describe(x) + ": ball point " + e.what());
  }

  const double center_value = project(center_out, projection, center_out);
  std::vector<double> values;
  values.reserve(ball_out.size());
  for (const Vector& y : ball_out) values.push_back(project(y, projection, center_out));

  double sum = 0.0;
  for (double v : values) sum += v;
  const auto k = static_cast<double>(values.size());
  const double mean = sum / k;

  GammaResult r;
  r.gamma = std::abs(center_value - mean);
  r.ball_count = values.size();
  if (ball_is_sampled(x.size(), spec) && values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    r.std_error = std::sqrt(ss / (k - 1.0)) / std::sqrt(k);
  }
  if (!std::isfinite(r.gamma)) fail(ErrorCode::NonFinite, "gamma at " + describe(x) + " is not finite");
  return r;
}

// ---------------------------------------------------------------------------

std::size_t RegionSpec::dimension() const {
  if (const auto* ps = std::get_if<PointSetSampling>(&sampling); ps && bounds.empty())
    return ps->points.empty() ? 0 : ps->points.front().size();
  return bounds.size();
}

std::size_t RegionSpec::size() const {
  return std::visit(
      [](const auto& s) -> std::size_t {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GridSampling>) {
          std::size_t total = 1;
          for (std::size_t c : s.counts) total *= c;
          return total;
        } else if constexpr (std::is_same_v<T, MonteCarloSampling>) {
          return s.count;
        } else {
          return s.points.size();
        }
      },
      sampling);
}

void RegionSpec::validate() const {
  for (std::size_t d = 0; d < bounds.size(); ++d)
    if (!(bounds[d].lo < bounds[d].hi))
      fail(ErrorCode::InvalidArgument, "region bound " + std::to_string(d) + " needs lo < hi");
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GridSampling>) {
          if (s.counts.size() != bounds.size() || bounds.empty())
            fail(ErrorCode::InvalidArgument, "grid needs one node count per bounded dimension");
          for (std::size_t c : s.counts)
            if (c == 0) fail(ErrorCode::InvalidArgument, "grid node counts must be >= 1");
        } else if constexpr (std::is_same_v<T, MonteCarloSampling>) {
          if (bounds.empty()) fail(ErrorCode::InvalidArgument, "Monte Carlo region needs bounds");
          if (s.count == 0) fail(ErrorCode::InvalidArgument, "Monte Carlo count must be >= 1");
        } else {
          if (s.points.empty()) fail(ErrorCode::InvalidArgument, "point set is empty");
          const std::size_t n = dimension();
          for (const Vector& p : s.points)
            if (p.size() != n) fail(ErrorCode::InvalidDimension, "point set mixes dimensions");
        }
      },
      sampling);
}

std::vector<Vector> RegionSpec::sample_points() const {
  validate();
  std::vector<Vector> pts;
  if (const auto* g = std::get_if<GridSampling>(&sampling)) {
    const std::size_t n = bounds.size();
    const std::size_t total = size();
    pts.reserve(total);
    std::vector<std::size_t> idx(n, 0);
    for (std::size_t flat = 0; flat < total; ++flat) {
      Vector p(n);
      for (std::size_t d = 0; d < n; ++d) {
        const std::size_t c = g->counts[d];
        const Interval& b = bounds[d];
        p[d] = c == 1 ? 0.5 * (b.lo + b.hi)
                      : b.lo + (b.hi - b.lo) * static_cast<double>(idx[d]) / static_cast<double>(c - 1);
      }
      pts.push_back(std::move(p));
      for (std::size_t d = n; d-- > 0;) {
        if (++idx[d] < g->counts[d]) break;
        idx[d] = 0;
      }
    }
  } else if (const auto* mc = std::get_if<MonteCarloSampling>(&sampling)) {
    pts.reserve(mc->count);
    for (std::size_t i = 0; i < mc->count; ++i) {
      std::mt19937_64 rng(derive_seed(mc->seed, {i}));
      Vector p(bounds.size());
      for (std::size_t d = 0; d < bounds.size(); ++d)
        p[d] = std::uniform_real_distribution<double>(bounds[d].lo, bounds[d].hi)(rng);
      pts.push_back(std::move(p));
    }
  } else {
    pts = std::get<PointSetSampling>(sampling).points;
  }
  return pts;
}

RegionSpec RegionSpec::grid(std::vector<Interval> bounds, std::vector<std::size_t> counts) {
  return RegionSpec{std::move(bounds), GridSampling{std::move(counts)}};
}

RegionSpec RegionSpec::monte_carlo(std::vector<Interval> bounds, std::size_t count, std::uint64_t seed) {
  return RegionSpec{std::move(bounds), MonteCarloSampling{count, seed}};
}

RegionSpec RegionSpec::point_set(std::vector<Vector> points) {
  return RegionSpec{{}, PointSetSampling{std::move(points)}};
}

BallSpec spec_for_point(const BallSpec& spec, std::span<const double> point) {
  BallSpec s = spec;
  s.seed = derive_seed(spec.seed, point);
  return s;
}

RegionResult gamma_region(const Model& model, const RegionSpec& region, const BallSpec& spec,
                          const OutputProjection& projection, const RunOptions& options) {
  spec.validate();
  if (region.dimension() != model.input_dim())
    fail(ErrorCode::InvalidDimension, "region has " + std::to_string(region.dimension()) +
                                          " dimensions, model expects " + std::to_string(model.input_dim()));
  return region_over_points(model, region.sample_points(), spec, projection, options);
}

GammaField gamma_field(const Model& model, const RegionSpec& region, const BallSpec& spec,
                       const OutputProjection& projection, const RunOptions& options) {
  if (!std::holds_alternative<GridSampling>(region.sampling))
    fail(ErrorCode::InvalidArgument, "gamma field needs a grid region");
  RegionResult r = gamma_region(model, region, spec, projection, options);
  GammaField field;
  field.region = region;
  field.skipped = r.skipped;
  field.nodes.reserve(r.per_point.size());
  field.values.reserve(r.per_point.size());
  for (PointGamma& p : r.per_point) {
    field.values.push_back(p.ok ? p.result.gamma : std::numeric_limits<double>::quiet_NaN());
    field.nodes.push_back(std::move(p.point));
  }
  return field;
}

std::vector<SweepRow> radius_sweep(const Model& model, const RegionSpec& region,
                                   std::span<const double> radii, const BallSpec& spec_template,
                                   const OutputProjection& projection, const RunOptions& options) {
  if (radii.empty()) fail(ErrorCode::InvalidArgument, "radius sweep needs at least one radius");
  for (double r : radii)
    if (!(r > 0.0)) fail(ErrorCode::InvalidArgument, "sweep radii must be positive");
  if (region.dimension() != model.input_dim())
    fail(ErrorCode::InvalidDimension, "region dimension does not match model input");
  const std::vector<Vector> points = region.sample_points();
  std::vector<SweepRow> rows;
  rows.reserve(radii.size());
  for (double r : radii) {
    BallSpec spec = spec_template;
    spec.radius = r;
    spec.validate();
    RegionResult res = region_over_points(model, points, spec, projection, options);
    rows.push_back({r, res.mean_gamma, res.std_error, res.count, res.skipped});
  }
  return rows;
}

double gamma_line_integral(const Model& model, std::span<const double> from,
                           std::span<const double> to, std::size_t intervals, const BallSpec& spec,
                           const OutputProjection& projection, const RunOptions& options) {
  if (intervals == 0) fail(ErrorCode::InvalidArgument, "line integral needs at least one interval");
  if (from.size() != to.size() || from.size() != model.input_dim())
    fail(ErrorCode::InvalidDimension, "segment endpoints must match the model input dimension");
  double length2 = 0.0;
  for (std::size_t i = 0; i < from.size(); ++i) length2 += (to[i] - from[i]) * (to[i] - from[i]);
  std::vector<Vector> pts;
  pts.reserve(intervals + 1);
  for (std::size_t k = 0; k <= intervals; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(intervals);
    Vector p(from.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = from[i] + t * (to[i] - from[i]);
    pts.push_back(std::move(p));
  }
  RunOptions strict = options;
  strict.lenient = false;
  RegionResult r = region_over_points(model, std::move(pts), spec, projection, strict);
  double sum = 0.0;
  for (std::size_t k = 0; k <= intervals; ++k) {
    const double w = (k == 0 || k == intervals) ? 0.5 : 1.0;
    sum += w * r.per_point[k].result.gamma;
  }
  return sum * std::sqrt(length2) / static_cast<double>(intervals);
}

}  // namespace harmonica
