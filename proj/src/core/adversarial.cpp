#include "adversarial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "analysis.hpp"
#include "error.hpp"
#include "parallel.hpp"
#include "seed.hpp"

namespace harmonica {
namespace {

bool onehot_directions(std::size_t n, const BallSpec& spec) {
  if (spec.scheme == BallScheme::HypercubeOneHot || spec.scheme == BallScheme::HypercubeSampled) return true;
  return spec.onehot_limit && n >= kOneHotLimitDimension &&
         (spec.scheme == BallScheme::Simplex || spec.scheme == BallScheme::SimplexAnti);
}

std::size_t workers(const Model& model, std::size_t jobs) {
  jobs = std::max<std::size_t>(jobs, 1);
  if (model.concurrency() > 0) jobs = std::min(jobs, model.concurrency());
  return jobs;
}

}  // namespace

AdversarialTrace adversarial_search(const Model& model, std::span<const double> x, const BallSpec& spec,
                                    std::size_t steps, const OutputProjection& projection,
                                    const SearchOptions& options) {
  if (steps == 0) fail(ErrorCode::Precondition, "adversarial search needs at least one step");
  spec.validate();
  validate_projection(projection, model.output_dim());
  const std::size_t n = model.input_dim();
  if (x.size() != n)
    fail(ErrorCode::InvalidDimension, "point has " + std::to_string(x.size()) + " coordinates, model expects " +
                                          std::to_string(n));

  AdversarialTrace trace;
  trace.origin.assign(x.begin(), x.end());
  trace.requested_steps = steps;
  trace.spec = spec;
  const Vector origin_out = model.eval(x);
  trace.origin_label = predicted_label(origin_out);
  // The class-logit component stays fixed at the origin's prediction.
  const OutputProjection fixed = resolve_projection(projection, origin_out);

  const auto& domain = model.domain();
  DomainPolicy policy = options.gamma.domain_policy;
  if (policy == DomainPolicy::Auto)
    policy = domain && domain->quantized ? DomainPolicy::Clamp : DomainPolicy::Skip;
  const bool onehot = onehot_directions(n, spec);

  Vector current = trace.origin;
  for (std::size_t step = 1; step <= steps; ++step) {
    try {
      BallSpec step_spec = spec;
      step_spec.seed = derive_seed(spec.seed, {step, 0});
      const std::vector<Vector> dirs = ball_directions(n, step_spec);

      struct Candidate {
        Vector point;
        std::size_t dir;
      };
      std::vector<Candidate> candidates;
      candidates.reserve(dirs.size());
      for (std::size_t j = 0; j < dirs.size(); ++j) {
        Vector p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = current[i] + spec.radius * dirs[j][i];
        if (domain && (domain->quantized || !domain->contains(p))) {
          if (domain->quantized || policy == DomainPolicy::Clamp) {
            p = domain->clamp(p);
          } else {
            continue;
          }
        }
        candidates.push_back({std::move(p), j});
      }
      if (candidates.empty()) fail(ErrorCode::EmptyBall, "no candidate lies inside the model domain");

      std::vector<double> gammas(candidates.size());
      parallel_for(candidates.size(), workers(model, options.jobs), [&](std::size_t c) {
        BallSpec inner = spec;
        inner.seed = derive_seed(spec.seed, {step, c + 1});
        gammas[c] = gamma_point(model, candidates[c].point, inner, fixed, options.gamma).gamma;
      });

      std::size_t best = 0;
      for (std::size_t c = 1; c < gammas.size(); ++c)
        if (gammas[c] > gammas[best]) best = c;

      AdversarialStep s;
      s.point = std::move(candidates[best].point);
      s.gamma = gammas[best];
      s.candidate_index = best;
      s.label = predicted_label(model.eval(s.point));
      if (onehot) {
        const std::size_t dir = candidates[best].dir;
        const auto coord = static_cast<std::size_t>(
            std::find_if(dirs[dir].begin(), dirs[dir].end(), [](double v) { return v != 0.0; }) - dirs[dir].begin());
        s.changed_coord = static_cast<std::ptrdiff_t>(coord);
        // Nominal displacement; the stored point may differ by rounding or clamping.
        s.delta = spec.radius * dirs[dir][coord];
      } else {
        double d2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) d2 += (s.point[i] - current[i]) * (s.point[i] - current[i]);
        s.delta = std::sqrt(d2);
      }
      if (options.record_candidates) s.candidate_gammas = std::move(gammas);
      current = s.point;
      trace.steps.push_back(std::move(s));
    } catch (const Error& e) {
      throw Error(e.code(), "adversarial step " + std::to_string(step) + ": " + e.what());
    }
    if (options.early_exit_on_flip && trace.steps.back().label != trace.origin_label) break;
  }
  trace.stable = trace.final_label() == trace.origin_label;
  return trace;
}

std::uint64_t sample_seed(std::uint64_t base, std::size_t index) {
  return derive_seed(base, {0xba7c4ULL, index});
}

std::vector<StabilityStats> aggregate_stats(std::span<const SampleRecord> records, std::size_t steps) {
  struct Acc {
    std::size_t count = 0, stable = 0, labeled = 0, correct = 0;
    double gamma = 0, prob = 0, predicted = 0, class_logit = 0, other_logit = 0;
  };
  std::map<std::int64_t, Acc> groups;
  for (const SampleRecord& r : records) {
    Acc& a = groups[r.predicted_label];
    ++a.count;
    a.stable += r.stable ? 1 : 0;
    if (r.true_label) {
      ++a.labeled;
      a.correct += *r.true_label == r.predicted_label ? 1 : 0;
    }
    a.gamma += r.gamma;
    a.prob += r.prob;
    a.predicted += predicted_stability(r.prob, r.gamma, static_cast<double>(steps));
    a.class_logit += r.class_logit;
    a.other_logit += r.mean_other_logit;
  }
  std::vector<StabilityStats> out;
  for (const auto& [cls, a] : groups) {
    const auto c = static_cast<double>(a.count);
    StabilityStats s;
    s.class_id = cls;
    s.count = a.count;
    if (a.labeled > 0) s.accuracy_pct = 100.0 * static_cast<double>(a.correct) / static_cast<double>(a.labeled);
    s.stability_pct = 100.0 * static_cast<double>(a.stable) / c;
    s.mean_gamma = a.gamma / c;
    s.mean_prob = a.prob / c;
    s.predicted_stability = a.predicted / c;
    s.mean_class_logit = a.class_logit / c;
    s.mean_other_logit = a.other_logit / c;
    out.push_back(s);
  }
  return out;
}

BatchResult batch_stability(const Model& model, std::span<const Sample> dataset, const BallSpec& spec,
                            std::size_t steps, const OutputProjection& projection,
                            const BatchOptions& options) {
  if (dataset.empty()) fail(ErrorCode::InvalidArgument, "dataset is empty");
  if (steps == 0) fail(ErrorCode::Precondition, "adversarial search needs at least one step");
  spec.validate();
  validate_projection(projection, model.output_dim());

  struct Slot {
    std::optional<SampleRecord> record;
    AdversarialTrace trace;
  };
  std::vector<Slot> slots(dataset.size());
  const std::size_t m = model.output_dim();

  parallel_for(dataset.size(), workers(model, options.jobs), [&](std::size_t i) {
    const Sample& sample = dataset[i];
    try {
      BallSpec sspec = spec;
      sspec.seed = sample_seed(spec.seed, i);
      const Vector out = model.eval(sample.x);
      SampleRecord rec;
      rec.index = i;
      rec.true_label = sample.label;
      rec.predicted_label = predicted_label(out);
      if (m == 1) {
        rec.prob = std::clamp(rec.predicted_label == 1 ? out[0] : 1.0 - out[0], 0.0, 1.0);
        rec.class_logit = out[0];
        rec.mean_other_logit = std::numeric_limits<double>::quiet_NaN();
        rec.mean_logit = out[0];
      } else {
        const auto cls = static_cast<std::size_t>(rec.predicted_label);
        const SoftmaxSummary non_class = softmax_summary(out, cls, LogitAverage::NonClass);
        rec.prob = non_class.class_prob;
        rec.class_logit = non_class.class_logit;
        rec.mean_other_logit = non_class.mean_logit;
        rec.mean_logit = softmax_summary(out, cls, LogitAverage::All).mean_logit;
      }
      const OutputProjection fixed = resolve_projection(projection, out);
      rec.gamma = gamma_point(model, sample.x, sspec, fixed, options.gamma).gamma;
      SearchOptions so;
      so.early_exit_on_flip = options.early_exit_on_flip;
      so.gamma = options.gamma;
      slots[i].trace = adversarial_search(model, sample.x, sspec, steps, projection, so);
      rec.stable = slots[i].trace.stable;
      slots[i].record = rec;
    } catch (const Error& e) {
      if (!options.lenient) throw Error(e.code(), "sample " + std::to_string(i) + ": " + e.what());
    }
  });

  BatchResult result;
  for (Slot& s : slots) {
    if (!s.record) {
      ++result.skipped;
      continue;
    }
    result.records.push_back(*s.record);
    result.traces.push_back(std::move(s.trace));
  }
  if (result.records.empty()) fail(ErrorCode::Backend, "no sample could be evaluated");
  result.stats = aggregate_stats(result.records, steps);
  return result;
}

}  // namespace harmonica
