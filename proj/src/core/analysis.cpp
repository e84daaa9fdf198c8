#include "analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "error.hpp"
#include "quadrature.hpp"

namespace harmonica {

double softmax_prob(std::span<const double> logits, std::size_t class_index) {
  if (logits.size() < 2) fail(ErrorCode::InvalidArgument, "softmax needs at least two logits");
  if (class_index >= logits.size()) fail(ErrorCode::InvalidArgument, "class index out of range");
  for (double l : logits)
    if (!std::isfinite(l)) fail(ErrorCode::NonFinite, "softmax of a non-finite logit");
  const double top = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (double l : logits) denom += std::exp(l - top);
  return std::exp(logits[class_index] - top) / denom;
}

double approx_prob(double class_logit, double mean_other_logit, std::size_t n_classes) {
  if (n_classes < 2) fail(ErrorCode::InvalidArgument, "approximate softmax needs at least two classes");
  if (!std::isfinite(class_logit) || !std::isfinite(mean_other_logit))
    fail(ErrorCode::NonFinite, "approximate softmax of a non-finite logit");
  // e^Lc / (e^Lc + (k-1) e^Lbar) = 1 / (1 + (k-1) e^(Lbar - Lc))
  return 1.0 / (1.0 + static_cast<double>(n_classes - 1) * std::exp(mean_other_logit - class_logit));
}

double predicted_stability(double class_prob, double gamma, double steps) {
  const double v = class_prob * std::exp(-steps * gamma);
  return std::clamp(v, std::numeric_limits<double>::min(), 1.0);
}

SoftmaxSummary softmax_summary(std::span<const double> logits, std::size_t class_index, LogitAverage average) {
  SoftmaxSummary s;
  s.class_prob = softmax_prob(logits, class_index);
  s.class_logit = logits[class_index];
  s.n_classes = logits.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (average == LogitAverage::All || i != class_index) sum += logits[i];
  s.mean_logit = sum / static_cast<double>(average == LogitAverage::All ? logits.size() : logits.size() - 1);
  return s;
}

// ---------------------------------------------------------------------------

namespace {

void check_edges(const Vector& edges, const char* what) {
  if (edges.size() < 2) fail(ErrorCode::InvalidArgument, std::string(what) + " edges need at least two values");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1]))
      fail(ErrorCode::InvalidArgument, std::string(what) + " edges must be strictly increasing");
}

std::size_t bin_of(const Vector& edges, double v) {
  const std::size_t bins = edges.size() - 1;
  if (!(v >= edges.front())) return 0;
  if (v >= edges.back()) return bins - 1;
  const auto it = std::upper_bound(edges.begin(), edges.end(), v);
  return static_cast<std::size_t>(it - edges.begin()) - 1;
}

}  // namespace

std::size_t GammaMap::prob_bin(double prob) const { return bin_of(prob_edges, prob); }
std::size_t GammaMap::gamma_bin(double gamma) const { return bin_of(gamma_edges, gamma); }

std::size_t GammaMap::total() const {
  std::size_t t = 0;
  for (const auto& c : cells) t += c.count;
  return t;
}

void GammaMap::merge(const GammaMap& other) {
  if (other.prob_edges != prob_edges || other.gamma_edges != gamma_edges)
    fail(ErrorCode::InvalidArgument, "cannot merge gamma maps with different edges");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    cells[i].count += other.cells[i].count;
    cells[i].stable_count += other.cells[i].stable_count;
  }
}

Vector uniform_edges(double lo, double hi, std::size_t bins) {
  if (bins == 0 || !(hi > lo)) fail(ErrorCode::InvalidArgument, "uniform edges need bins >= 1 and hi > lo");
  Vector e(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) e[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  e.back() = hi;
  return e;
}

GammaMap build_gamma_map(std::span<const StabilityRecord> records, Vector prob_edges, Vector gamma_edges) {
  if (records.empty()) fail(ErrorCode::InvalidArgument, "gamma map needs at least one record");
  check_edges(prob_edges, "probability");
  check_edges(gamma_edges, "gamma");
  GammaMap map;
  map.prob_edges = std::move(prob_edges);
  map.gamma_edges = std::move(gamma_edges);
  map.cells.assign(map.prob_bins() * map.gamma_bins(), {});
  for (const StabilityRecord& r : records) {
    GammaMapCell& c = map.cells[map.prob_bin(r.prob) * map.gamma_bins() + map.gamma_bin(r.gamma)];
    ++c.count;
    c.stable_count += r.stable ? 1 : 0;
  }
  return map;
}

GammaMap build_gamma_map(std::span<const StabilityRecord> records, std::size_t prob_bins, std::size_t gamma_bins) {
  if (records.empty()) fail(ErrorCode::InvalidArgument, "gamma map needs at least one record");
  std::vector<double> gammas;
  gammas.reserve(records.size());
  for (const auto& r : records) gammas.push_back(r.gamma);
  std::sort(gammas.begin(), gammas.end());
  // Nearest-rank 99th percentile.
  const auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(gammas.size())));
  double top = gammas[std::max<std::size_t>(rank, 1) - 1];
  if (!(top > 0.0)) top = gammas.back();
  if (!(top > 0.0)) top = 1.0;
  return build_gamma_map(records, uniform_edges(0.0, 1.0, prob_bins), uniform_edges(0.0, top, gamma_bins));
}

std::optional<double> lookup_stability(const GammaMap& map, double prob, double gamma, LookupFallback fallback) {
  const std::size_t p = map.prob_bin(prob);
  const std::size_t g = map.gamma_bin(gamma);
  if (auto f = map.cell(p, g).fraction()) return f;
  if (fallback == LookupFallback::None) return std::nullopt;
  std::optional<double> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < map.prob_bins(); ++i) {
    for (std::size_t j = 0; j < map.gamma_bins(); ++j) {
      const auto f = map.cell(i, j).fraction();
      if (!f) continue;
      const double di = static_cast<double>(i) - static_cast<double>(p);
      const double dj = static_cast<double>(j) - static_cast<double>(g);
      const double d = di * di + dj * dj;
      if (d < best_d) {
        best_d = d;
        best = f;
      }
    }
  }
  return best;
}

// ---------------------------------------------------------------------------

double boundary_band_integral(double r) {
  if (!(r >= 0.0)) fail(ErrorCode::InvalidArgument, "band radius must be non-negative");
  return 2.0 * r / std::numbers::pi;
}

double boundary_band_integral_quadrature(double r) {
  if (!(r >= 0.0)) fail(ErrorCode::InvalidArgument, "band radius must be non-negative");
  if (r == 0.0) return 0.0;
  // With t = x / r in [0, 1]: on the 0 side the circle average is the arc
  // fraction above the boundary, arccos(t)/pi; on the 1 side the value is 1
  // and the average is 1 - arccos(t)/pi.
  auto below = [](double t) { return std::abs(0.0 - 2.0 * std::acos(t) / (2.0 * std::numbers::pi)); };
  auto above = [](double t) {
    return std::abs(1.0 - (2.0 * std::numbers::pi - 2.0 * std::acos(t)) / (2.0 * std::numbers::pi));
  };
  return r * (adaptive_simpson(below, 0.0, 1.0, 1e-9) + adaptive_simpson(above, 0.0, 1.0, 1e-9));
}

namespace {
void check_band(double r, double height) {
  if (!(height > 0.0)) fail(ErrorCode::InvalidArgument, "region height must be positive");
  if (!(r >= 0.0)) fail(ErrorCode::InvalidArgument, "band radius must be non-negative");
  if (r >= 0.5 * height)
    fail(ErrorCode::BandOverlap, "radius " + std::to_string(r) + " >= H/2: bands from the region edges overlap");
}
}  // namespace

double boundary_band_average(double r, double height) {
  check_band(r, height);
  return boundary_band_integral(r) / height;
}

double boundary_band_average_quadrature(double r, double height) {
  check_band(r, height);
  return boundary_band_integral_quadrature(r) / height;
}

}  // namespace harmonica
