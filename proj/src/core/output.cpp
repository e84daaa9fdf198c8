#include "output.hpp"

#include <charconv>
#include <cmath>

#include "error.hpp"

namespace harmonica {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::InvalidDimension: return "invalid dimension";
    case ErrorCode::Precondition: return "precondition violated";
    case ErrorCode::EmptyBall: return "empty ball";
    case ErrorCode::Parse: return "parse error";
    case ErrorCode::Io: return "i/o error";
    case ErrorCode::Backend: return "backend error";
    case ErrorCode::Timeout: return "timeout";
    case ErrorCode::NonDeterministic: return "non-deterministic model";
    case ErrorCode::NonFinite: return "non-finite value";
    case ErrorCode::BandOverlap: return "band overlap";
  }
  return "unknown error";
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void write_field_csv(std::ostream& out, const GammaField& field) {
  const std::size_t n = field.region.dimension();
  for (std::size_t d = 0; d < n; ++d) out << "dim" << d << ',';
  out << "gamma\n";
  for (std::size_t i = 0; i < field.nodes.size(); ++i) {
    for (double c : field.nodes[i]) out << format_double(c) << ',';
    out << format_double(field.values[i]) << '\n';
  }
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "radius,mean_gamma,stderr\n";
  for (const auto& r : rows)
    out << format_double(r.radius) << ',' << format_double(r.mean_gamma) << ',' << format_double(r.std_error) << '\n';
}

void write_per_point_csv(std::ostream& out, const RegionResult& result) {
  const std::size_t n = result.per_point.empty() ? 0 : result.per_point.front().point.size();
  out << "idx,";
  for (std::size_t d = 0; d < n; ++d) out << "dim" << d << ',';
  out << "gamma,stderr,ball_count\n";
  for (std::size_t i = 0; i < result.per_point.size(); ++i) {
    const PointGamma& p = result.per_point[i];
    out << i << ',';
    for (double c : p.point) out << format_double(c) << ',';
    if (p.ok)
      out << format_double(p.result.gamma) << ',' << format_double(p.result.std_error) << ',' << p.result.ball_count;
    else
      out << "nan,nan,0";
    out << '\n';
  }
}

void write_simplex_csv(std::ostream& out, const SimplexBasis& basis) {
  for (std::size_t d = 0; d < basis.dimension; ++d) out << (d ? "," : "") << "dim" << d;
  out << '\n';
  for (const auto& v : basis.vertices) {
    for (std::size_t d = 0; d < v.size(); ++d) out << (d ? "," : "") << format_double(v[d]);
    out << '\n';
  }
}

void write_stats_csv(std::ostream& out, std::span<const StabilityStats> stats, bool with_logits) {
  out << "class,count,accuracy_pct,stability_pct,mean_gamma,mean_prob,predicted_stability";
  if (with_logits) out << ",mean_class_logit,mean_other_logit";
  out << '\n';
  for (const auto& s : stats) {
    out << s.class_id << ',' << s.count << ',' << (s.accuracy_pct ? format_double(*s.accuracy_pct) : "") << ','
        << format_double(s.stability_pct) << ',' << format_double(s.mean_gamma) << ',' << format_double(s.mean_prob)
        << ',' << format_double(s.predicted_stability);
    if (with_logits) out << ',' << format_double(s.mean_class_logit) << ',' << format_double(s.mean_other_logit);
    out << '\n';
  }
}

void write_records_csv(std::ostream& out, std::span<const SampleRecord> records) {
  out << "index,label,true_label,prob,gamma,stable\n";
  for (const auto& r : records) {
    out << r.index << ',' << r.predicted_label << ',' << (r.true_label ? std::to_string(*r.true_label) : "") << ','
        << format_double(r.prob) << ',' << format_double(r.gamma) << ',' << (r.stable ? 1 : 0) << '\n';
  }
}

void write_gamma_map_csv(std::ostream& out, const GammaMap& map) {
  out << "prob_lo,prob_hi,gamma_lo,gamma_hi,count,stable_count,fraction\n";
  for (std::size_t p = 0; p < map.prob_bins(); ++p) {
    for (std::size_t g = 0; g < map.gamma_bins(); ++g) {
      const GammaMapCell& c = map.cell(p, g);
      const auto f = c.fraction();
      out << format_double(map.prob_edges[p]) << ',' << format_double(map.prob_edges[p + 1]) << ','
          << format_double(map.gamma_edges[g]) << ',' << format_double(map.gamma_edges[g + 1]) << ',' << c.count
          << ',' << c.stable_count << ',' << (f ? format_double(*f) : "") << '\n';
    }
  }
}

void write_trace_jsonl(std::ostream& out, const AdversarialTrace& trace) {
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    const AdversarialStep& s = trace.steps[k];
    out << "{\"step\":" << k + 1 << ",\"gamma\":" << format_double(s.gamma) << ",\"label\":" << s.label
        << ",\"changed_coord\":" << s.changed_coord << ",\"delta\":" << format_double(s.delta) << "}\n";
  }
}

}  // namespace harmonica
