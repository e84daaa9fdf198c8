#pragma once

#include <ostream>
#include <span>
#include <string>

#include "adversarial.hpp"
#include "analysis.hpp"
#include "gamma.hpp"
#include "geometry.hpp"

namespace harmonica {

/// Shortest round-trip decimal form; "nan"/"inf"/"-inf" for non-finite values.
std::string format_double(double v);

void write_field_csv(std::ostream& out, const GammaField& field);
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);
void write_per_point_csv(std::ostream& out, const RegionResult& result);
void write_simplex_csv(std::ostream& out, const SimplexBasis& basis);

/// Table 3 style columns; logit columns are appended when `with_logits` is set.
void write_stats_csv(std::ostream& out, std::span<const StabilityStats> stats, bool with_logits = false);
/// Per-sample records: index,label,true_label,prob,gamma,stable.
void write_records_csv(std::ostream& out, std::span<const SampleRecord> records);
void write_gamma_map_csv(std::ostream& out, const GammaMap& map);
/// One JSON object per step.
void write_trace_jsonl(std::ostream& out, const AdversarialTrace& trace);

}  // namespace harmonica
