#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace harmonica {

using Vector = std::vector<double>;

enum class BallScheme {
  Simplex,
  SimplexAnti,
  Random,
  HypercubeOneHot,
  HypercubeSampled,
  UniformCircle,  // 2-D only: k equally spaced points on the circle
};

std::string_view to_string(BallScheme scheme) noexcept;
BallScheme parse_ball_scheme(std::string_view name);

/// How the ball B(x, r) is approximated by a finite point set.
struct BallSpec {
  BallScheme scheme = BallScheme::Simplex;
  double radius = 1.0;
  double sample_fraction = 1.0;  // HypercubeSampled only
  std::uint64_t seed = 0;        // Random and HypercubeSampled
  std::size_t circle_points = 64;
  // For n >= kOneHotLimitDimension, Simplex/SimplexAnti become the signed
  // one-hot set (their large-n limit together with the reflection).
  bool onehot_limit = false;

  void validate() const;
};

inline constexpr std::size_t kOneHotLimitDimension = 4096;

/// n+1 unit vertices of the origin-centred regular n-simplex.
struct SimplexBasis {
  std::size_t dimension = 0;
  std::vector<Vector> vertices;
};

SimplexBasis simplex_vertices(std::size_t n);

/// Vertex k (0 <= k <= n) of simplex_vertices(n), computed in O(n) without
/// materialising the rest of the basis. Vertices 0..n-1 derive from the
/// coordinate axes; vertex n derives from the auxiliary axis.
Vector simplex_vertex(std::size_t n, std::size_t k);

/// R = I + (n2 n1^T - n1 n2^T) sin(theta) + (n1 n1^T + n2 n2^T)(cos(theta) - 1).
/// Rotates n1 toward n2 by theta inside span{n1, n2}; identity elsewhere.
Eigen::MatrixXd rodrigues_rotation(std::span<const double> n1, std::span<const double> n2,
                                   double theta);

/// Applies rodrigues_rotation(n1, n2, theta) to v in O(n).
Vector apply_rodrigues(std::span<const double> n1, std::span<const double> n2, double theta,
                       std::span<const double> v);

/// Number of points ball_points() returns for a centre of dimension n.
std::size_t ball_size(std::size_t n, const BallSpec& spec);

/// Returns the unit displacements for the spec (before scaling by radius).
std::vector<Vector> ball_directions(std::size_t n, const BallSpec& spec);

std::vector<Vector> ball_points(std::span<const double> center, const BallSpec& spec);

/// Whether repeated draws of the ball can differ with the seed.
bool ball_is_sampled(std::size_t n, const BallSpec& spec);

struct Coverage {
  double centrality = 0.0;  // |sum of displacements|
  double isotropy = 0.0;    // population stddev of angles to the first axis
};

Coverage coverage_metrics(std::span<const Vector> points, std::span<const double> center);

}  // namespace harmonica
