#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "core/adversarial.hpp"
#include "core/error.hpp"
#include "core/mlp.hpp"
#include "core/model.hpp"

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

BallSpec ball(BallScheme scheme, double r, std::uint64_t seed = 0) {
  BallSpec s;
  s.scheme = scheme;
  s.radius = r;
  s.seed = seed;
  return s;
}

const OutputProjection kScalar = OutputProjection::scalar();

// One-hot walk computed directly from model values: candidates +e0, -e0, +e1, ...,
// gamma = |f(c) - mean f over c's one-hot ball|, first maximum wins.
std::vector<Vector> brute_force_walk(const Model& m, Vector x, double r, std::size_t steps) {
  const std::size_t n = x.size();
  auto f = [&](const Vector& p) { return m.eval(p)[0]; };
  auto shifted = [&](const Vector& p, std::size_t k) {
    Vector q = p;
    q[k / 2] += (k % 2 == 0 ? r : -r);
    return q;
  };
  std::vector<Vector> path;
  for (std::size_t s = 0; s < steps; ++s) {
    double best_gamma = -1.0;
    Vector best;
    for (std::size_t k = 0; k < 2 * n; ++k) {
      const Vector c = shifted(x, k);
      double mean = 0.0;
      for (std::size_t j = 0; j < 2 * n; ++j) mean += f(shifted(c, j));
      const double g = std::abs(f(c) - mean / static_cast<double>(2 * n));
      if (g > best_gamma) {
        best_gamma = g;
        best = c;
      }
    }
    x = best;
    path.push_back(x);
  }
  return path;
}

ModelHandle identity_net(std::size_t n) {
  std::string w;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) w += std::string(i + j ? "," : "") + (i == j ? "1" : "0");
  std::string b;
  for (std::size_t i = 0; i < n; ++i) b += i ? ",0" : "0";
  return make_mlp(parse_mlp_json(R"({"layers":[{"rows":)" + std::to_string(n) + R"(,"cols":)" + std::to_string(n) +
                                 R"(,"weights":[)" + w + R"(],"bias":[)" + b + R"(],"activation":"identity"}]})"));
}

// Fails on inputs with x0 < 0.
class FailsBelowZero final : public Model {
 public:
  std::size_t input_dim() const override { return 2; }
  std::size_t output_dim() const override { return 2; }
  Backend backend() const override { return Backend::Builtin; }

 protected:
  Vector do_eval(std::span<const double> x) const override {
    if (x[0] < 0) fail(ErrorCode::Backend, "negative input");
    return {x[0], x[1]};
  }
};

class EdgeInX0 final : public Model {
 public:
  std::size_t input_dim() const override { return 2; }
  std::size_t output_dim() const override { return 1; }
  Backend backend() const override { return Backend::Builtin; }

 protected:
  Vector do_eval(std::span<const double> x) const override { return {x[0] > 1.1 ? 1.0 : 0.0}; }
};

}  // namespace

TEST_CASE("constant model walks along the first direction") {
  auto c = make_builtin(BuiltinKind::Constant, 3, parse_builtin_params("c=0.9"));
  const AdversarialTrace t =
      adversarial_search(*c, Vector{0, 0, 0}, ball(BallScheme::HypercubeOneHot, 0.5), 3, kScalar);
  REQUIRE(t.steps.size() == 3);
  CHECK(t.stable);
  CHECK(t.origin_label == 1);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(t.steps[k].gamma == 0.0);
    CHECK(t.steps[k].candidate_index == 0);
    CHECK(t.steps[k].changed_coord == 0);
    CHECK(t.steps[k].delta == 0.5);
    CHECK(t.steps[k].point == Vector{0.5 * static_cast<double>(k + 1), 0, 0});
  }
  CHECK(code_of([&] { adversarial_search(*c, Vector{0, 0, 0}, ball(BallScheme::Simplex, 1), 0, kScalar); }) ==
        ErrorCode::Precondition);
  CHECK(code_of([&] { adversarial_search(*c, Vector{0, 0}, ball(BallScheme::Simplex, 1), 1, kScalar); }) ==
        ErrorCode::InvalidDimension);
}

TEST_CASE("walks near a straight edge match the brute-force oracle") {
  const double r = 0.05;
  auto step = make_builtin(BuiltinKind::Step2d, 2, parse_builtin_params("level=1.5"));
  for (double offset : {0.5, 1.5, 2.5, 3.0, 4.0}) {
    CAPTURE(offset);
    const Vector x{2.5, 1.5 - offset * r};
    const AdversarialTrace t = adversarial_search(*step, x, ball(BallScheme::HypercubeOneHot, r), 12, kScalar);
    const auto oracle = brute_force_walk(*step, x, r, 12);
    REQUIRE(t.steps.size() == oracle.size());
    for (std::size_t k = 0; k < oracle.size(); ++k) CHECK(t.steps[k].point == oracle[k]);
  }
  // Three radii away every candidate sees gamma 0, so the walk ties to +e0 and never
  // reaches the edge.
  const AdversarialTrace far =
      adversarial_search(*step, Vector{2.5, 1.5 - 3 * r}, ball(BallScheme::HypercubeOneHot, r), 25, kScalar);
  CHECK(far.stable);
  for (const auto& s : far.steps) {
    CHECK(s.changed_coord == 0);
    CHECK(s.delta == r);
    CHECK(s.gamma == 0.0);
  }
}

TEST_CASE("trace invariants") {
  auto f4 = make_builtin(BuiltinKind::F4, 5);
  const Vector x{0.1, -0.2, 0.3, 0.0, 0.05};
  SearchOptions opts;
  opts.record_candidates = true;
  SUBCASE("one-hot") {
    const double r = 0.2;
    const AdversarialTrace t = adversarial_search(*f4, x, ball(BallScheme::HypercubeOneHot, r), 8, kScalar, opts);
    REQUIRE(t.steps.size() == 8);
    Vector prev = x;
    for (const auto& s : t.steps) {
      REQUIRE(s.candidate_gammas.size() == 10);
      const auto best = std::max_element(s.candidate_gammas.begin(), s.candidate_gammas.end());
      CHECK(s.gamma == *best);
      CHECK(s.candidate_index == static_cast<std::size_t>(best - s.candidate_gammas.begin()));
      std::size_t changed = 0;
      for (std::size_t i = 0; i < 5; ++i)
        if (s.point[i] != prev[i]) {
          ++changed;
          CHECK(static_cast<std::ptrdiff_t>(i) == s.changed_coord);
          CHECK(s.point[i] - prev[i] == doctest::Approx(s.delta));
        }
      CHECK(changed == 1);
      CHECK(std::abs(s.delta) == r);
      CHECK(s.label == predicted_label(f4->eval(s.point)));
      prev = s.point;
    }
  }
  SUBCASE("simplex steps have length r") {
    const AdversarialTrace t = adversarial_search(*f4, x, ball(BallScheme::Simplex, 0.3), 5, kScalar, opts);
    for (const auto& s : t.steps) {
      CHECK(s.changed_coord == -1);
      CHECK(s.delta == doctest::Approx(0.3).epsilon(1e-12));
      CHECK(s.candidate_gammas.size() == 6);
    }
  }
}

TEST_CASE("early exit stops at the first flip") {
  // Indicator of x0 > 1.1 with r = 0.25 (all values exact): the walk ties to +e0
  // until the edge is in reach, then +e0 is the unique or first maximum, and the
  // label flips on the fifth step at x0 = 1.25.
  EdgeInX0 m;
  const Vector x{0.0, 0.0};
  const BallSpec spec = ball(BallScheme::HypercubeOneHot, 0.25);
  SearchOptions opts;
  opts.early_exit_on_flip = true;
  const AdversarialTrace t = adversarial_search(m, x, spec, 25, kScalar, opts);
  CHECK_FALSE(t.stable);
  REQUIRE(t.steps.size() == 5);
  CHECK(t.final_point() == Vector{1.25, 0.0});
  CHECK(t.final_label() == 1);
  for (std::size_t k = 0; k + 1 < t.steps.size(); ++k) CHECK(t.steps[k].label == 0);
  CHECK(adversarial_search(m, x, spec, 25, kScalar).steps.size() == 25);
}

TEST_CASE("10000-pixel model changes at most one pixel per step") {
  const std::size_t n = 10000;
  std::string w;
  w.reserve(2 * n * 8);
  for (std::size_t i = 0; i < 2 * n; ++i) {
    w += i ? "," : "";
    w += std::to_string(std::sin(static_cast<double>(i)) * 1e-3);
  }
  auto m = make_mlp(parse_mlp_json(R"({"layers":[{"rows":2,"cols":10000,"weights":[)" + w +
                                   R"(],"bias":[0,0],"activation":"identity"}]})"));
  m->set_domain(Domain::pixels(n));
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>((i * 31) % 256);
  BallSpec spec = ball(BallScheme::HypercubeSampled, 100, 42);
  spec.sample_fraction = 0.001;
  const AdversarialTrace t = adversarial_search(*m, x, spec, 25, OutputProjection::class_logit());
  REQUIRE(t.steps.size() == 25);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < n; ++i) changed += t.final_point()[i] != x[i] ? 1 : 0;
  CHECK(changed <= 25);
  for (const auto& s : t.steps) {
    CHECK(s.changed_coord >= 0);
    for (double v : s.point) CHECK((v >= 0 && v <= 255 && v == std::round(v)));
  }
}

TEST_CASE("searches are reproducible") {
  auto f4 = make_builtin(BuiltinKind::F4, 4);
  const Vector x{0.2, 0.1, -0.3, 0.4};
  for (auto scheme : {BallScheme::Random, BallScheme::HypercubeSampled}) {
    BallSpec spec = ball(scheme, 0.1, 123);
    spec.sample_fraction = 0.5;
    SearchOptions serial, wide;
    wide.jobs = 3;
    const AdversarialTrace a = adversarial_search(*f4, x, spec, 10, kScalar, serial);
    const AdversarialTrace b = adversarial_search(*f4, x, spec, 10, kScalar, wide);
    REQUIRE(a.steps.size() == b.steps.size());
    for (std::size_t k = 0; k < a.steps.size(); ++k) {
      CHECK(a.steps[k].point == b.steps[k].point);
      CHECK(a.steps[k].gamma == b.steps[k].gamma);
    }
    spec.seed = 124;
    const AdversarialTrace c = adversarial_search(*f4, x, spec, 10, kScalar);
    CHECK(c.final_point() != a.final_point());
  }
}

TEST_CASE("batch stability") {
  SUBCASE("constant model is always stable") {
    auto c = make_builtin(BuiltinKind::Constant, 2, parse_builtin_params("c=0.8"));
    std::vector<Sample> data;
    for (int i = 0; i < 12; ++i) data.push_back({{0.1 * i, -0.1 * i}, std::nullopt});
    const BatchResult r = batch_stability(*c, data, ball(BallScheme::Simplex, 0.1), 4, kScalar);
    REQUIRE(r.stats.size() == 1);
    CHECK(r.stats[0].class_id == 1);
    CHECK(r.stats[0].count == 12);
    CHECK(r.stats[0].stability_pct == 100.0);
    CHECK_FALSE(r.stats[0].accuracy_pct.has_value());
    CHECK(r.stats[0].mean_prob == doctest::Approx(0.8));
    CHECK(r.stats[0].predicted_stability == doctest::Approx(0.8));
    CHECK(r.traces.size() == 12);
    CHECK(std::isnan(r.records[0].mean_other_logit));
  }
  SUBCASE("single-output probability is that of the predicted class") {
    auto c = make_builtin(BuiltinKind::Constant, 1, parse_builtin_params("c=0.3"));
    const std::vector<Sample> data{{{0.0}, 0}};
    const BatchResult r = batch_stability(*c, data, ball(BallScheme::Simplex, 0.1), 2, kScalar);
    CHECK(r.records[0].predicted_label == 0);
    CHECK(r.records[0].prob == doctest::Approx(0.7));
    CHECK(r.stats[0].accuracy_pct == 100.0);
  }
  SUBCASE("records, accuracy and softmax summaries") {
    auto m = identity_net(3);
    const std::vector<Sample> data{{{3, 0, 0}, 0}, {{0, 2, 0}, 1}, {{0, 0, 5}, 1}, {{4, 1, 1}, 0}, {{0, 0, 1}, 2}};
    const BatchResult r = batch_stability(*m, data, ball(BallScheme::HypercubeOneHot, 0.01), 3,
                                          OutputProjection::class_logit(), {2, false, false, {}});
    REQUIRE(r.records.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(r.records[i].index == i);
    const SampleRecord& first = r.records[0];
    CHECK(first.predicted_label == 0);
    CHECK(first.class_logit == 3.0);
    CHECK(first.mean_other_logit == 0.0);
    CHECK(first.mean_logit == 1.0);
    CHECK(first.prob == doctest::Approx(std::exp(3.0) / (std::exp(3.0) + 2)));
    REQUIRE(r.stats.size() == 3);
    CHECK(r.stats[0].class_id == 0);
    CHECK(r.stats[0].count == 2);
    CHECK(r.stats[0].accuracy_pct == 100.0);
    CHECK(r.stats[1].count == 1);
    CHECK(r.stats[2].class_id == 2);
    CHECK(r.stats[2].count == 2);
    CHECK(r.stats[2].accuracy_pct == 50.0);
    // Linear outputs: gamma is zero and tiny steps never flip a clear winner.
    for (const auto& rec : r.records) {
      CHECK(rec.gamma < 1e-12);
      CHECK(rec.stable);
    }
  }
  SUBCASE("jobs do not change results") {
    auto f4 = make_builtin(BuiltinKind::F4, 2);
    std::vector<Sample> data;
    for (int i = 0; i < 8; ++i) data.push_back({{0.1 * i, 0.05 * i}, std::nullopt});
    const BallSpec spec = ball(BallScheme::Random, 0.1, 9);
    const BatchResult a = batch_stability(*f4, data, spec, 3, kScalar, {1, false, false, {}});
    const BatchResult b = batch_stability(*f4, data, spec, 3, kScalar, {4, false, false, {}});
    for (std::size_t i = 0; i < 8; ++i) {
      CHECK(a.records[i].gamma == b.records[i].gamma);
      CHECK(a.traces[i].final_point() == b.traces[i].final_point());
    }
    // Sample i uses its own derived seed.
    BallSpec own = spec;
    own.seed = sample_seed(spec.seed, 5);
    CHECK(adversarial_search(*f4, data[5].x, own, 3, kScalar).final_point() == a.traces[5].final_point());
  }
  SUBCASE("lenient batches skip failing samples") {
    FailsBelowZero m;
    const std::vector<Sample> data{{{1, 0}, std::nullopt}, {{-1, 0}, std::nullopt}, {{2, 1}, std::nullopt}};
    const BallSpec spec = ball(BallScheme::Simplex, 0.1);
    CHECK(code_of([&] { batch_stability(m, data, spec, 2, OutputProjection::class_logit()); }) == ErrorCode::Backend);
    const BatchResult r = batch_stability(m, data, spec, 2, OutputProjection::class_logit(), {1, true, false, {}});
    CHECK(r.skipped == 1);
    REQUIRE(r.records.size() == 2);
    CHECK(r.records[1].index == 2);
    CHECK(code_of([&] { batch_stability(m, std::span<const Sample>{}, spec, 2, kScalar); }) ==
          ErrorCode::InvalidArgument);
  }
}
