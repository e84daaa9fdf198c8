#include "geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "error.hpp"
#include "seed.hpp"

namespace harmonica {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

void check_orthonormal(std::span<const double> n1, std::span<const double> n2) {
  constexpr double tol = 1e-10;
  if (n1.size() != n2.size() || n1.empty())
    fail(ErrorCode::Precondition, "rotation plane vectors must be non-empty and of equal length");
  if (std::abs(dot(n1, n1) - 1.0) > tol || std::abs(dot(n2, n2) - 1.0) > tol ||
      std::abs(dot(n1, n2)) > tol)
    fail(ErrorCode::Precondition, "rotation plane vectors are not orthonormal");
}

std::size_t sampled_count(std::size_t n, double fraction) {
  double raw = fraction * 2.0 * static_cast<double>(n);
  return static_cast<std::size_t>(std::ceil(raw - 1e-9));
}

bool uses_onehot_limit(std::size_t n, const BallSpec& spec) {
  return spec.onehot_limit && n >= kOneHotLimitDimension &&
         (spec.scheme == BallScheme::Simplex || spec.scheme == BallScheme::SimplexAnti);
}

Vector onehot(std::size_t n, std::size_t signed_index) {
  Vector v(n, 0.0);
  v[signed_index / 2] = (signed_index % 2 == 0) ? 1.0 : -1.0;
  return v;
}

}  // namespace

std::string_view to_string(BallScheme scheme) noexcept {
  switch (scheme) {
    case BallScheme::Simplex: return "simplex";
    case BallScheme::SimplexAnti: return "simplex-anti";
    case BallScheme::Random: return "random";
    case BallScheme::HypercubeOneHot: return "hypercube";
    case BallScheme::HypercubeSampled: return "hypercube-sampled";
    case BallScheme::UniformCircle: return "circle";
  }
  return "?";
}

BallScheme parse_ball_scheme(std::string_view name) {
  for (auto s : {BallScheme::Simplex, BallScheme::SimplexAnti, BallScheme::Random,
                 BallScheme::HypercubeOneHot, BallScheme::HypercubeSampled,
                 BallScheme::UniformCircle})
    if (to_string(s) == name) return s;
  fail(ErrorCode::InvalidArgument, "unknown ball scheme '" + std::string(name) + "'");
}

void BallSpec::validate() const {
  if (!(radius > 0.0) || !std::isfinite(radius))
    fail(ErrorCode::InvalidArgument, "ball radius must be positive and finite");
  if (scheme == BallScheme::HypercubeSampled && !(sample_fraction > 0.0 && sample_fraction <= 1.0))
    fail(ErrorCode::InvalidArgument, "sample fraction must lie in (0, 1]");
  if (scheme == BallScheme::UniformCircle && circle_points < 2)
    fail(ErrorCode::InvalidArgument, "circle ball needs at least 2 points");
}

Eigen::MatrixXd rodrigues_rotation(std::span<const double> n1, std::span<const double> n2,
                                   double theta) {
  check_orthonormal(n1, n2);
  const auto n = static_cast<Eigen::Index>(n1.size());
  Eigen::Map<const Eigen::VectorXd> a(n1.data(), n);
  Eigen::Map<const Eigen::VectorXd> b(n2.data(), n);
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(n, n);
  r += (b * a.transpose() - a * b.transpose()) * std::sin(theta);
  r += (a * a.transpose() + b * b.transpose()) * (std::cos(theta) - 1.0);
  return r;
}

Vector apply_rodrigues(std::span<const double> n1, std::span<const double> n2, double theta,
                       std::span<const double> v) {
  check_orthonormal(n1, n2);
  if (v.size() != n1.size())
    fail(ErrorCode::InvalidDimension, "vector does not match rotation dimension");
  const double a = dot(n1, v);
  const double b = dot(n2, v);
  const double s = std::sin(theta);
  const double c1 = std::cos(theta) - 1.0;
  Vector out(v.begin(), v.end());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] += n2[i] * a * s - n1[i] * b * s + (n1[i] * a + n2[i] * b) * c1;
  return out;
}

Vector simplex_vertex(std::size_t n, std::size_t k) {
  if (n == 0) fail(ErrorCode::InvalidDimension, "simplex dimension must be at least 1");
  if (k > n) fail(ErrorCode::InvalidArgument, "simplex vertex index out of range");
  const std::size_t m = n + 1;
  const double inv_m = 1.0 / static_cast<double>(m);

  // Standard basis vector of the lifted space, centred on the group mean.
  Vector centred(m, -inv_m);
  centred[k] += 1.0;

  // Plane of rotation: the auxiliary axis and the in-plane part of the normal.
  Vector aux(m, 0.0);
  aux[n] = 1.0;
  Vector diag(m, 1.0 / std::sqrt(static_cast<double>(n)));
  diag[n] = 0.0;

  // The formula rotates `aux` toward `diag`; the negative angle carries the
  // hyperplane normal onto the auxiliary axis so its coordinate vanishes.
  const double theta = std::acos(1.0 / std::sqrt(static_cast<double>(m)));
  Vector rotated = apply_rodrigues(aux, diag, -theta, centred);
  rotated.pop_back();

  const double norm = std::sqrt(dot(rotated, rotated));
  for (double& x : rotated) x /= norm;
  return rotated;
}

SimplexBasis simplex_vertices(std::size_t n) {
  if (n == 0) fail(ErrorCode::InvalidDimension, "simplex dimension must be at least 1");
  SimplexBasis basis;
  basis.dimension = n;
  basis.vertices.reserve(n + 1);
  for (std::size_t k = 0; k <= n; ++k) basis.vertices.push_back(simplex_vertex(n, k));
  return basis;
}

std::size_t ball_size(std::size_t n, const BallSpec& spec) {
  spec.validate();
  if (n == 0) fail(ErrorCode::InvalidDimension, "ball centre must have dimension >= 1");
  if (spec.scheme == BallScheme::UniformCircle && n != 2)
    fail(ErrorCode::InvalidDimension, "circle ball is defined for 2-D inputs only");
  if (uses_onehot_limit(n, spec)) return 2 * n;
  switch (spec.scheme) {
    case BallScheme::Simplex: return n + 1;
    case BallScheme::SimplexAnti: return 2 * (n + 1);
    case BallScheme::Random: return n;
    case BallScheme::HypercubeOneHot: return 2 * n;
    case BallScheme::HypercubeSampled: return sampled_count(n, spec.sample_fraction);
    case BallScheme::UniformCircle: return spec.circle_points;
  }
  return 0;
}

bool ball_is_sampled(std::size_t n, const BallSpec& spec) {
  if (spec.scheme == BallScheme::Random) return true;
  if (spec.scheme == BallScheme::HypercubeSampled) return ball_size(n, spec) < 2 * n;
  return false;
}

std::vector<Vector> ball_directions(std::size_t n, const BallSpec& spec) {
  spec.validate();
  if (n == 0) fail(ErrorCode::InvalidDimension, "ball centre must have dimension >= 1");
  std::vector<Vector> dirs;

  if (uses_onehot_limit(n, spec)) {
    dirs.reserve(2 * n);
    for (std::size_t j = 0; j < 2 * n; ++j) dirs.push_back(onehot(n, j));
    return dirs;
  }

  switch (spec.scheme) {
    case BallScheme::Simplex:
      dirs = simplex_vertices(n).vertices;
      break;
    case BallScheme::SimplexAnti: {
      dirs = simplex_vertices(n).vertices;
      const std::size_t count = dirs.size();
      dirs.reserve(2 * count);
      for (std::size_t k = 0; k < count; ++k) {
        Vector neg = dirs[k];
        for (double& x : neg) x = -x;
        dirs.push_back(std::move(neg));
      }
      break;
    }
    case BallScheme::Random: {
      dirs.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        std::mt19937_64 rng(derive_seed(spec.seed, {i}));
        std::normal_distribution<double> normal;
        Vector u(n);
        double norm2 = 0.0;
        while (norm2 == 0.0) {
          for (double& x : u) x = normal(rng);
          norm2 = dot(u, u);
        }
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& x : u) x *= inv;
        dirs.push_back(std::move(u));
      }
      break;
    }
    case BallScheme::HypercubeOneHot:
      dirs.reserve(2 * n);
      for (std::size_t j = 0; j < 2 * n; ++j) dirs.push_back(onehot(n, j));
      break;
    case BallScheme::HypercubeSampled: {
      const std::size_t total = 2 * n;
      const std::size_t count = sampled_count(n, spec.sample_fraction);
      if (count == 0) fail(ErrorCode::EmptyBall, "sample fraction selects no ball points");
      std::vector<std::size_t> idx(total);
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      std::mt19937_64 rng(derive_seed(spec.seed, {0x5eedULL}));
      for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, total - 1);
        std::swap(idx[i], idx[pick(rng)]);
      }
      dirs.reserve(count);
      for (std::size_t i = 0; i < count; ++i) dirs.push_back(onehot(n, idx[i]));
      break;
    }
    case BallScheme::UniformCircle: {
      if (n != 2) fail(ErrorCode::InvalidDimension, "circle ball is defined for 2-D inputs only");
      const std::size_t k = spec.circle_points;
      dirs.reserve(k);
      for (std::size_t j = 0; j < k; ++j) {
        const double phi = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(k);
        dirs.push_back({std::cos(phi), std::sin(phi)});
      }
      break;
    }
  }
  if (dirs.empty()) fail(ErrorCode::EmptyBall, "ball has no points");
  return dirs;
}

std::vector<Vector> ball_points(std::span<const double> center, const BallSpec& spec) {
  std::vector<Vector> points = ball_directions(center.size(), spec);
  for (Vector& p : points)
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = center[i] + spec.radius * p[i];
  return points;
}

Coverage coverage_metrics(std::span<const Vector> points, std::span<const double> center) {
  if (points.size() < 2) fail(ErrorCode::InvalidArgument, "coverage metrics need at least 2 points");
  const std::size_t n = center.size();
  Vector sum(n, 0.0);
  std::vector<double> angles;
  angles.reserve(points.size());
  for (const Vector& p : points) {
    if (p.size() != n) fail(ErrorCode::InvalidDimension, "point dimension does not match centre");
    double norm2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = p[i] - center[i];
      sum[i] += d;
      norm2 += d * d;
    }
    if (norm2 == 0.0) fail(ErrorCode::InvalidArgument, "point coincides with the centre");
    const double c = std::clamp((p[0] - center[0]) / std::sqrt(norm2), -1.0, 1.0);
    angles.push_back(std::acos(c));
  }
  Coverage cov;
  cov.centrality = std::sqrt(dot(sum, sum));
  const double mean = std::accumulate(angles.begin(), angles.end(), 0.0) / angles.size();
  double var = 0.0;
  for (double a : angles) var += (a - mean) * (a - mean);
  cov.isotropy = std::sqrt(var / static_cast<double>(angles.size()));
  return cov;
}

}  // namespace harmonica
