#include <doctest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include "core/analysis.hpp"
#include "core/error.hpp"

using namespace harmonica;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

struct TableRow {
  double class_logit;
  double mean_logit;
  double prob;
  double gamma;
  double predicted;
};

// Published per-class averages (ViT rows carry both logits; ResNet rows only P and gamma).
const TableRow kVit[] = {
    {8.91, -6.9e-5, 0.881, 0.027, 0.45}, {8.84, -3.0e-5, 0.873, 0.034, 0.37}, {8.07, 4.5e-5, 0.762, 0.022, 0.44},
    {10.18, 2.8e-4, 0.963, 0.082, 0.12}, {11.07, 1.2e-4, 0.985, 0.039, 0.37}, {12.98, 1.8e-6, 0.995, 0.027, 0.51},
    {8.95, 3.9e-5, 0.885, 0.020, 0.54},  {10.99, 2.6e-5, 0.983, 0.029, 0.48}, {9.72, -2.2e-5, 0.944, 0.022, 0.54},
    {11.72, 1.0e-4, 0.992, 0.044, 0.33},
};
const TableRow kResnet[] = {
    {0, 0, 0.911, 0.042, 0.32}, {0, 0, 0.929, 0.038, 0.36}, {0, 0, 0.953, 0.037, 0.38}, {0, 0, 0.973, 0.054, 0.25},
    {0, 0, 0.984, 0.040, 0.36}, {0, 0, 0.984, 0.041, 0.35}, {0, 0, 0.987, 0.038, 0.38}, {0, 0, 0.992, 0.035, 0.41},
    {0, 0, 0.993, 0.033, 0.44}, {0, 0, 0.999, 0.044, 0.33},
};

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i] / n;
    mb += b[i] / n;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

std::vector<StabilityRecord> synthetic_records(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> prob(0.0, 1.0), gamma(0.0, 0.1), coin(0.0, 1.0);
  std::vector<StabilityRecord> out;
  for (std::size_t i = 0; i < count; ++i) {
    const double p = prob(rng), g = gamma(rng);
    out.push_back({p, g, coin(rng) < p * std::exp(-25 * g)});
  }
  return out;
}

}  // namespace

TEST_CASE("softmax") {
  CHECK(softmax_prob(Vector{0, 0}, 0) == 0.5);
  CHECK(softmax_prob(Vector{1, 2, 3}, 2) == doctest::Approx(std::exp(3.0) / (std::exp(1.0) + std::exp(2.0) + std::exp(3.0))));
  // Max subtraction keeps huge logits finite.
  CHECK(softmax_prob(Vector{1000, 1000, 1000, 1000}, 1) == doctest::Approx(0.25));
  CHECK(softmax_prob(Vector{-1000, 0}, 0) == 0.0);
  CHECK(code_of([] { softmax_prob(Vector{1}, 0); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { softmax_prob(Vector{1, 2}, 2); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { softmax_prob(Vector{1, INFINITY}, 0); }) == ErrorCode::NonFinite);

  const SoftmaxSummary s = softmax_summary(Vector{4, 1, 2, 3}, 0);
  CHECK(s.class_logit == 4);
  CHECK(s.mean_logit == 2);
  CHECK(s.n_classes == 4);
  CHECK(softmax_summary(Vector{4, 1, 2, 3}, 0, LogitAverage::All).mean_logit == 2.5);
}

TEST_CASE("two-parameter softmax equals the full softmax when the others are equal") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-20, 20);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + static_cast<std::size_t>(trial % 40);
    const double lc = u(rng), lo = u(rng);
    Vector logits(k, lo);
    logits[trial % k] = lc;
    CHECK(approx_prob(lc, lo, k) == doctest::Approx(softmax_prob(logits, trial % k)).epsilon(1e-12));
  }
  CHECK(approx_prob(8.91, 0, 1000) == doctest::Approx(0.8811).epsilon(1e-4));
  // Monotone in the class logit and in the class count.
  double prev = 0.0;
  for (double lc = -5; lc <= 15; lc += 0.5) {
    const double p = approx_prob(lc, 0, 1000);
    CHECK(p > prev);
    prev = p;
  }
  CHECK(approx_prob(3, 0, 10) > approx_prob(3, 0, 100));
  CHECK(code_of([] { approx_prob(1, 0, 1); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("published per-class averages") {
  for (const TableRow& row : kVit) {
    CAPTURE(row.class_logit);
    CHECK(std::abs(approx_prob(row.class_logit, row.mean_logit, 1000) - row.prob) < 0.005);
    CHECK(std::abs(predicted_stability(row.prob, row.gamma, 25) - row.predicted) < 0.005);
  }
  for (const TableRow& row : kResnet) {
    CAPTURE(row.prob);
    CHECK(std::abs(predicted_stability(row.prob, row.gamma, 25) - row.predicted) < 0.005);
  }
  CHECK(predicted_stability(1.0, 0.0, 25) == 1.0);
  CHECK(predicted_stability(0.9, 1e6, 25) > 0.0);
}

TEST_CASE("gamma map binning") {
  const std::vector<StabilityRecord> recs{{0.05, 0.01, true}, {0.05, 0.01, false}, {0.95, 0.09, true},
                                          {1.0, 0.5, true},   {0.5, 0.05, false}};
  const GammaMap map = build_gamma_map(recs, uniform_edges(0, 1, 10), uniform_edges(0, 0.1, 10));
  CHECK(map.total() == 5);
  CHECK(map.cell(0, 1).count == 2);
  CHECK(map.cell(0, 1).fraction() == 0.5);
  // Out-of-range gamma lands in the last bin; an interior edge belongs to the bin above.
  CHECK(map.cell(9, 9).count == 2);
  CHECK(map.prob_bin(0.5) == 5);
  CHECK(map.gamma_bin(-3) == 0);
  CHECK_FALSE(map.cell(3, 3).fraction().has_value());
  CHECK(lookup_stability(map, 0.05, 0.015) == 0.5);
  CHECK_FALSE(lookup_stability(map, 0.35, 0.035).has_value());
  // Nearest non-empty cell: (5, 5) is 2 bins away, (0, 1) much further.
  CHECK(lookup_stability(map, 0.35, 0.055, LookupFallback::NearestNonEmpty) == 0.0);
  CHECK(code_of([&] { build_gamma_map(recs, Vector{0, 0.5, 0.5, 1}, uniform_edges(0, 1, 2)); }) ==
        ErrorCode::InvalidArgument);
  CHECK(code_of([&] { build_gamma_map(recs, Vector{0}, uniform_edges(0, 1, 2)); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("gamma map merge and refinement") {
  const auto recs = synthetic_records(4000, 5);
  const Vector pe = uniform_edges(0, 1, 10), ge = uniform_edges(0, 0.1, 10);
  const GammaMap whole = build_gamma_map(recs, pe, ge);
  GammaMap left = build_gamma_map(std::span(recs).first(1500), pe, ge);
  left.merge(build_gamma_map(std::span(recs).subspan(1500), pe, ge));
  for (std::size_t i = 0; i < whole.cells.size(); ++i) {
    CHECK(left.cells[i].count == whole.cells[i].count);
    CHECK(left.cells[i].stable_count == whole.cells[i].stable_count);
  }
  CHECK_THROWS_AS(left.merge(build_gamma_map(recs, uniform_edges(0, 1, 5), ge)), Error);

  // Halving every bin splits counts without losing any.
  const GammaMap fine = build_gamma_map(recs, uniform_edges(0, 1, 20), uniform_edges(0, 0.1, 20));
  for (std::size_t p = 0; p < 10; ++p)
    for (std::size_t g = 0; g < 10; ++g) {
      std::size_t count = 0, stable = 0;
      for (std::size_t dp = 0; dp < 2; ++dp)
        for (std::size_t dg = 0; dg < 2; ++dg) {
          count += fine.cell(2 * p + dp, 2 * g + dg).count;
          stable += fine.cell(2 * p + dp, 2 * g + dg).stable_count;
        }
      CHECK(count == whole.cell(p, g).count);
      CHECK(stable == whole.cell(p, g).stable_count);
    }

  const GammaMap dflt = build_gamma_map(recs);
  CHECK(dflt.prob_bins() == 10);
  CHECK(dflt.gamma_edges.front() == 0.0);
  CHECK(dflt.gamma_edges.back() < 0.1);
  CHECK(dflt.gamma_edges.back() > 0.098);
  CHECK(dflt.total() == 4000);
}

TEST_CASE("gamma map tracks P exp(-N gamma)") {
  const auto recs = synthetic_records(10000, 17);
  const GammaMap map = build_gamma_map(recs, uniform_edges(0, 1, 10), uniform_edges(0, 0.1, 10));
  std::vector<double> observed, predicted;
  for (std::size_t p = 0; p < 10; ++p)
    for (std::size_t g = 0; g < 10; ++g)
      if (auto f = map.cell(p, g).fraction()) {
        observed.push_back(*f);
        const double pc = 0.5 * (map.prob_edges[p] + map.prob_edges[p + 1]);
        const double gc = 0.5 * (map.gamma_edges[g] + map.gamma_edges[g + 1]);
        predicted.push_back(pc * std::exp(-25 * gc));
      }
  CHECK(observed.size() == 100);
  CHECK(pearson(observed, predicted) > 0.8);
}

TEST_CASE("boundary band") {
  CHECK(boundary_band_integral(0.05) == doctest::Approx(0.1 / std::numbers::pi).epsilon(1e-15));
  for (double r : {0.001, 0.01, 0.05, 0.2, 1.0}) {
    CAPTURE(r);
    CHECK(std::abs(boundary_band_integral_quadrature(r) / boundary_band_integral(r) - 1) < 1e-6);
    for (double h : {3.0, 10.0}) {
      if (r >= h / 2) continue;
      CHECK(std::abs(boundary_band_average_quadrature(r, h) / boundary_band_average(r, h) - 1) < 1e-6);
    }
  }
  CHECK(boundary_band_average(0.05, 3) == doctest::Approx(0.0106103).epsilon(1e-5));
  CHECK(code_of([] { boundary_band_average(1.5, 3); }) == ErrorCode::BandOverlap);
  CHECK(code_of([] { boundary_band_average_quadrature(2, 3); }) == ErrorCode::BandOverlap);
}
