#include "harmonica/harmonica.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <limits>
#include <new>
#include <string>
#include <utility>

#include "core/adversarial.hpp"
#include "core/analysis.hpp"
#include "core/error.hpp"
#include "core/external.hpp"
#include "core/gamma.hpp"
#include "core/geometry.hpp"
#include "core/image.hpp"
#include "core/mlp.hpp"
#include "core/model.hpp"
#include "core/output.hpp"

namespace hc = harmonica;

struct hm_model {
  hc::ModelHandle impl;
};
struct hm_region {
  hc::RegionSpec impl;
};
struct hm_region_result {
  hc::RegionResult impl;
};
struct hm_field {
  hc::GammaField impl;
};
struct hm_trace {
  hc::AdversarialTrace impl;
};
struct hm_batch_result {
  hc::BatchResult impl;
  std::vector<hm_trace> traces;
};
struct hm_gamma_map {
  hc::GammaMap impl;
};

namespace {

thread_local std::string g_last_error;

hm_status status_of(hc::ErrorCode code) {
  switch (code) {
    case hc::ErrorCode::InvalidArgument: return HM_ERR_INVALID_ARGUMENT;
    case hc::ErrorCode::InvalidDimension: return HM_ERR_INVALID_DIMENSION;
    case hc::ErrorCode::Precondition: return HM_ERR_PRECONDITION;
    case hc::ErrorCode::EmptyBall: return HM_ERR_EMPTY_BALL;
    case hc::ErrorCode::Parse: return HM_ERR_PARSE;
    case hc::ErrorCode::Io: return HM_ERR_IO;
    case hc::ErrorCode::Backend: return HM_ERR_BACKEND;
    case hc::ErrorCode::Timeout: return HM_ERR_TIMEOUT;
    case hc::ErrorCode::NonDeterministic: return HM_ERR_NON_DETERMINISTIC;
    case hc::ErrorCode::NonFinite: return HM_ERR_NON_FINITE;
    case hc::ErrorCode::BandOverlap: return HM_ERR_BAND_OVERLAP;
  }
  return HM_ERR_INTERNAL;
}

template <class F>
hm_status guard(F&& f) noexcept {
  try {
    f();
    return HM_OK;
  } catch (const hc::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return HM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return HM_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return HM_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) hc::fail(hc::ErrorCode::InvalidArgument, std::string(what) + " must not be null");
}

void check_capacity(std::size_t capacity, std::size_t required) {
  if (capacity < required)
    hc::fail(hc::ErrorCode::InvalidArgument,
             "output buffer holds " + std::to_string(capacity) + " values, need " + std::to_string(required));
}

std::span<const double> view(const double* p, std::size_t n) {
  if (n > 0) need(p, "input array");
  return {p, n};
}

hc::BallSpec to_core(const hm_ball_spec* s) {
  need(s, "ball spec");
  hc::BallSpec spec;
  switch (s->scheme) {
    case HM_SCHEME_SIMPLEX: spec.scheme = hc::BallScheme::Simplex; break;
    case HM_SCHEME_SIMPLEX_ANTI: spec.scheme = hc::BallScheme::SimplexAnti; break;
    case HM_SCHEME_RANDOM: spec.scheme = hc::BallScheme::Random; break;
    case HM_SCHEME_HYPERCUBE: spec.scheme = hc::BallScheme::HypercubeOneHot; break;
    case HM_SCHEME_HYPERCUBE_SAMPLED: spec.scheme = hc::BallScheme::HypercubeSampled; break;
    case HM_SCHEME_CIRCLE: spec.scheme = hc::BallScheme::UniformCircle; break;
    default: hc::fail(hc::ErrorCode::InvalidArgument, "unknown ball scheme " + std::to_string(s->scheme));
  }
  spec.radius = s->radius;
  spec.sample_fraction = s->sample_fraction;
  spec.seed = s->seed;
  spec.circle_points = s->circle_points;
  spec.onehot_limit = s->onehot_limit != 0;
  spec.validate();
  return spec;
}

hm_scheme to_c(hc::BallScheme s) {
  switch (s) {
    case hc::BallScheme::Simplex: return HM_SCHEME_SIMPLEX;
    case hc::BallScheme::SimplexAnti: return HM_SCHEME_SIMPLEX_ANTI;
    case hc::BallScheme::Random: return HM_SCHEME_RANDOM;
    case hc::BallScheme::HypercubeOneHot: return HM_SCHEME_HYPERCUBE;
    case hc::BallScheme::HypercubeSampled: return HM_SCHEME_HYPERCUBE_SAMPLED;
    case hc::BallScheme::UniformCircle: return HM_SCHEME_CIRCLE;
  }
  return HM_SCHEME_SIMPLEX;
}

hc::OutputProjection to_core(const hm_projection* p) {
  need(p, "projection");
  switch (p->mode) {
    case HM_PROJECT_SCALAR: return hc::OutputProjection::scalar();
    case HM_PROJECT_COMPONENT: return hc::OutputProjection::index(p->component);
    case HM_PROJECT_CLASS_LOGIT: return hc::OutputProjection::class_logit();
    case HM_PROJECT_NORM: return hc::OutputProjection::norm();
  }
  hc::fail(hc::ErrorCode::InvalidArgument, "unknown projection mode");
}

hm_projection to_c(const hc::OutputProjection& p) {
  hm_projection out{};
  switch (p.mode) {
    case hc::ProjectionMode::Scalar: out.mode = HM_PROJECT_SCALAR; break;
    case hc::ProjectionMode::Component: out.mode = HM_PROJECT_COMPONENT; break;
    case hc::ProjectionMode::PredictedClassLogit: out.mode = HM_PROJECT_CLASS_LOGIT; break;
    case hc::ProjectionMode::Norm: out.mode = HM_PROJECT_NORM; break;
  }
  out.component = p.component;
  return out;
}

hc::DomainPolicy to_core(hm_domain_policy p) {
  switch (p) {
    case HM_DOMAIN_AUTO: return hc::DomainPolicy::Auto;
    case HM_DOMAIN_CLAMP: return hc::DomainPolicy::Clamp;
    case HM_DOMAIN_SKIP: return hc::DomainPolicy::Skip;
  }
  hc::fail(hc::ErrorCode::InvalidArgument, "unknown domain policy");
}

hc::RunOptions to_core(const hm_run_options* o) {
  hc::RunOptions opts;
  if (!o) return opts;
  opts.jobs = o->jobs == 0 ? 1 : o->jobs;
  opts.lenient = o->lenient != 0;
  opts.gamma.domain_policy = to_core(o->domain_policy);
  return opts;
}

const hc::Model& model_of(const hm_model* m) {
  need(m, "model");
  return *m->impl;
}

hc::ExternalOptions to_core(const hm_external_options* o) {
  hc::ExternalOptions opts;
  if (!o) return opts;
  opts.input_dim = o->input_dim;
  opts.output_dim = o->output_dim;
  opts.pool_size = o->pool_size == 0 ? 1 : o->pool_size;
  opts.timeout_seconds = o->timeout_seconds;
  opts.probe_determinism = o->probe_determinism != 0;
  return opts;
}

std::vector<hc::Vector> rows_of(const double* data, std::size_t count, std::size_t n) {
  if (count > 0 && n > 0) need(data, "input array");
  std::vector<hc::Vector> rows(count);
  for (std::size_t i = 0; i < count; ++i) rows[i].assign(data + i * n, data + (i + 1) * n);
  return rows;
}

std::vector<hc::Interval> bounds_of(std::size_t dim, const double* lo, const double* hi) {
  need(lo, "lower bounds");
  need(hi, "upper bounds");
  std::vector<hc::Interval> b(dim);
  for (std::size_t d = 0; d < dim; ++d) b[d] = {lo[d], hi[d]};
  return b;
}

// Writes through `write` to the file at path, or stdout for "-". A failed
// file write leaves no partial file behind.
template <class W>
void write_to(const char* path, W&& write) {
  need(path, "path");
  if (std::strcmp(path, "-") == 0) {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) hc::fail(hc::ErrorCode::Io, std::string("cannot open ") + path + " for writing");
  write(out);
  out.flush();
  if (!out) {
    out.close();
    std::remove(path);
    hc::fail(hc::ErrorCode::Io, std::string("write to ") + path + " failed");
  }
}

template <class T>
void emit(T** out, T* value) {
  if (!out) {
    delete value;
    need(out, "output handle");
  }
  *out = value;
}

hc::SearchOptions search_options(const hm_search_options* o) {
  hc::SearchOptions opts;
  if (!o) return opts;
  opts.jobs = o->jobs == 0 ? 1 : o->jobs;
  opts.early_exit_on_flip = o->early_exit_on_flip != 0;
  opts.record_candidates = o->record_candidates != 0;
  opts.gamma.domain_policy = to_core(o->domain_policy);
  return opts;
}

const hc::AdversarialStep& step_of(const hm_trace* t, std::size_t step) {
  need(t, "trace");
  if (step >= t->impl.steps.size())
    hc::fail(hc::ErrorCode::InvalidArgument, "step " + std::to_string(step) + " out of range");
  return t->impl.steps[step];
}

std::vector<hc::StabilityRecord> records_of(const hm_stability_record* records, std::size_t count) {
  if (count > 0) need(records, "records");
  std::vector<hc::StabilityRecord> r(count);
  for (std::size_t i = 0; i < count; ++i) r[i] = {records[i].prob, records[i].gamma, records[i].stable != 0};
  return r;
}

}  // namespace

extern "C" {

const char* hm_last_error(void) { return g_last_error.c_str(); }

const char* hm_status_string(hm_status status) {
  switch (status) {
    case HM_OK: return "ok";
    case HM_ERR_INVALID_ARGUMENT: return hc::to_string(hc::ErrorCode::InvalidArgument);
    case HM_ERR_INVALID_DIMENSION: return hc::to_string(hc::ErrorCode::InvalidDimension);
    case HM_ERR_PRECONDITION: return hc::to_string(hc::ErrorCode::Precondition);
    case HM_ERR_EMPTY_BALL: return hc::to_string(hc::ErrorCode::EmptyBall);
    case HM_ERR_PARSE: return hc::to_string(hc::ErrorCode::Parse);
    case HM_ERR_IO: return hc::to_string(hc::ErrorCode::Io);
    case HM_ERR_BACKEND: return hc::to_string(hc::ErrorCode::Backend);
    case HM_ERR_TIMEOUT: return hc::to_string(hc::ErrorCode::Timeout);
    case HM_ERR_NON_DETERMINISTIC: return hc::to_string(hc::ErrorCode::NonDeterministic);
    case HM_ERR_NON_FINITE: return hc::to_string(hc::ErrorCode::NonFinite);
    case HM_ERR_BAND_OVERLAP: return hc::to_string(hc::ErrorCode::BandOverlap);
    case HM_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

// ---- geometry --------------------------------------------------------------

void hm_ball_spec_init(hm_ball_spec* spec) {
  if (!spec) return;
  const hc::BallSpec d;
  spec->scheme = to_c(d.scheme);
  spec->radius = d.radius;
  spec->sample_fraction = d.sample_fraction;
  spec->seed = d.seed;
  spec->circle_points = d.circle_points;
  spec->onehot_limit = d.onehot_limit ? 1 : 0;
}

hm_status hm_parse_scheme(const char* name, hm_scheme* out) {
  return guard([&] {
    need(name, "scheme name");
    need(out, "output");
    *out = to_c(hc::parse_ball_scheme(name));
  });
}

const char* hm_scheme_name(hm_scheme scheme) {
  switch (scheme) {
    case HM_SCHEME_SIMPLEX: return "simplex";
    case HM_SCHEME_SIMPLEX_ANTI: return "simplex-anti";
    case HM_SCHEME_RANDOM: return "random";
    case HM_SCHEME_HYPERCUBE: return "hypercube";
    case HM_SCHEME_HYPERCUBE_SAMPLED: return "hypercube-sampled";
    case HM_SCHEME_CIRCLE: return "circle";
  }
  return "unknown";
}

hm_status hm_simplex_vertices(size_t n, double* out, size_t capacity) {
  return guard([&] {
    const hc::SimplexBasis basis = hc::simplex_vertices(n);
    check_capacity(capacity, (n + 1) * n);
    need(out, "output");
    for (std::size_t k = 0; k <= n; ++k) std::copy(basis.vertices[k].begin(), basis.vertices[k].end(), out + k * n);
  });
}

hm_status hm_rodrigues_rotation(const double* n1, const double* n2, size_t n, double theta, double* out,
                                size_t capacity) {
  return guard([&] {
    const Eigen::MatrixXd r = hc::rodrigues_rotation(view(n1, n), view(n2, n), theta);
    check_capacity(capacity, n * n);
    need(out, "output");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] = r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  });
}

hm_status hm_ball_size(size_t n, const hm_ball_spec* spec, size_t* out) {
  return guard([&] {
    need(out, "output");
    *out = hc::ball_size(n, to_core(spec));
  });
}

hm_status hm_ball_points(const double* center, size_t n, const hm_ball_spec* spec, double* out, size_t capacity) {
  return guard([&] {
    const auto pts = hc::ball_points(view(center, n), to_core(spec));
    check_capacity(capacity, pts.size() * n);
    need(out, "output");
    for (std::size_t i = 0; i < pts.size(); ++i) std::copy(pts[i].begin(), pts[i].end(), out + i * n);
  });
}

hm_status hm_coverage_metrics(const double* points, size_t count, const double* center, size_t n,
                              double* centrality, double* isotropy) {
  return guard([&] {
    const auto rows = rows_of(points, count, n);
    const hc::Coverage c = hc::coverage_metrics(rows, view(center, n));
    if (centrality) *centrality = c.centrality;
    if (isotropy) *isotropy = c.isotropy;
  });
}

// ---- models ----------------------------------------------------------------

void hm_external_options_init(hm_external_options* options) {
  if (!options) return;
  const hc::ExternalOptions d;
  options->input_dim = d.input_dim;
  options->output_dim = d.output_dim;
  options->pool_size = d.pool_size;
  options->timeout_seconds = d.timeout_seconds;
  options->probe_determinism = d.probe_determinism ? 1 : 0;
}

hm_status hm_model_builtin(const char* name, size_t n, const char* params, hm_model** out) {
  return guard([&] {
    need(name, "builtin name");
    const hc::BuiltinKind kind = hc::parse_builtin_kind(name);
    hc::BuiltinParams p = params ? hc::parse_builtin_params(params) : hc::BuiltinParams{};
    emit(out, new hm_model{hc::make_builtin(kind, n, std::move(p))});
  });
}

hm_status hm_model_load_mlp(const char* path, hm_model** out) {
  return guard([&] {
    need(path, "path");
    emit(out, new hm_model{hc::load_mlp(path)});
  });
}

hm_status hm_model_subprocess(const char* command, const hm_external_options* options, hm_model** out) {
  return guard([&] {
    need(command, "command");
    emit(out, new hm_model{hc::connect_subprocess(command, to_core(options))});
  });
}

hm_status hm_model_http(const char* url, const hm_external_options* options, hm_model** out) {
  return guard([&] {
    need(url, "url");
    emit(out, new hm_model{hc::connect_http(url, to_core(options))});
  });
}

void hm_model_free(hm_model* model) { delete model; }

size_t hm_model_input_dim(const hm_model* model) { return model ? model->impl->input_dim() : 0; }
size_t hm_model_output_dim(const hm_model* model) { return model ? model->impl->output_dim() : 0; }

hm_backend hm_model_backend(const hm_model* model) {
  switch (model->impl->backend()) {
    case hc::Backend::Builtin: return HM_BACKEND_BUILTIN;
    case hc::Backend::Mlp: return HM_BACKEND_MLP;
    case hc::Backend::Subprocess: return HM_BACKEND_SUBPROCESS;
    case hc::Backend::Http: return HM_BACKEND_HTTP;
  }
  return HM_BACKEND_BUILTIN;
}

hm_status hm_model_set_domain(hm_model* model, const double* lower, const double* upper, int quantized) {
  return guard([&] {
    need(model, "model");
    const std::size_t n = model->impl->input_dim();
    hc::Domain d;
    d.lower.assign(view(lower, n).begin(), view(lower, n).end());
    d.upper.assign(view(upper, n).begin(), view(upper, n).end());
    d.quantized = quantized != 0;
    model->impl->set_domain(std::move(d));
  });
}

hm_status hm_model_set_pixel_domain(hm_model* model) {
  return guard([&] {
    need(model, "model");
    model->impl->set_domain(hc::Domain::pixels(model->impl->input_dim()));
  });
}

hm_status hm_model_eval(const hm_model* model, const double* x, size_t n, double* y, size_t m) {
  return guard([&] {
    const hc::Vector out = model_of(model).eval(view(x, n));
    check_capacity(m, out.size());
    need(y, "output");
    std::copy(out.begin(), out.end(), y);
  });
}

hm_status hm_model_eval_batch(const hm_model* model, const double* xs, size_t count, size_t n, double* ys,
                              size_t capacity) {
  return guard([&] {
    const auto outs = model_of(model).eval_batch(rows_of(xs, count, n));
    const std::size_t m = model_of(model).output_dim();
    check_capacity(capacity, count * m);
    if (count > 0) need(ys, "output");
    for (std::size_t i = 0; i < outs.size(); ++i) std::copy(outs[i].begin(), outs[i].end(), ys + i * m);
  });
}

hm_status hm_parse_projection(const char* text, hm_projection* out) {
  return guard([&] {
    need(text, "projection");
    need(out, "output");
    *out = to_c(hc::parse_projection(text));
  });
}

hm_projection hm_default_projection(size_t output_dim) { return to_c(hc::default_projection(output_dim)); }

hm_status hm_project(const double* output, size_t m, const hm_projection* projection, const double* anchor,
                     double* out) {
  return guard([&] {
    need(out, "output");
    std::optional<std::span<const double>> a;
    if (anchor) a = std::span<const double>(anchor, m);
    *out = hc::project(view(output, m), to_core(projection), a);
  });
}

hm_status hm_load_grayscale_image(const char* path, size_t target_w, size_t target_h, double* out,
                                  size_t capacity) {
  return guard([&] {
    need(path, "path");
    const hc::Vector px = hc::load_grayscale_image(path, target_w, target_h);
    check_capacity(capacity, px.size());
    need(out, "output");
    std::copy(px.begin(), px.end(), out);
  });
}

hm_status hm_pgm_size(const char* path, size_t* width, size_t* height) {
  return guard([&] {
    need(path, "path");
    const hc::GrayImage img = hc::read_pgm(path);
    if (width) *width = img.width;
    if (height) *height = img.height;
  });
}

hm_status hm_write_pgm(const char* path, size_t width, size_t height, const double* pixels) {
  return guard([&] {
    need(path, "path");
    hc::write_pgm(path, width, height, view(pixels, width * height));
  });
}

// ---- gamma -----------------------------------------------------------------

void hm_run_options_init(hm_run_options* options) {
  if (!options) return;
  options->jobs = 1;
  options->lenient = 0;
  options->domain_policy = HM_DOMAIN_AUTO;
}

hm_status hm_gamma_point(const hm_model* model, const double* x, size_t n, const hm_ball_spec* spec,
                         const hm_projection* projection, const hm_run_options* options, hm_gamma_result* out) {
  return guard([&] {
    need(out, "output");
    const hc::GammaResult r =
        hc::gamma_point(model_of(model), view(x, n), to_core(spec), to_core(projection), to_core(options).gamma);
    *out = {r.gamma, r.ball_count, r.std_error};
  });
}

hm_status hm_region_grid(size_t dim, const double* lo, const double* hi, const size_t* counts, hm_region** out) {
  return guard([&] {
    need(counts, "counts");
    auto region = hc::RegionSpec::grid(bounds_of(dim, lo, hi), std::vector<std::size_t>(counts, counts + dim));
    region.validate();
    emit(out, new hm_region{std::move(region)});
  });
}

hm_status hm_region_monte_carlo(size_t dim, const double* lo, const double* hi, size_t count, uint64_t seed,
                                hm_region** out) {
  return guard([&] {
    auto region = hc::RegionSpec::monte_carlo(bounds_of(dim, lo, hi), count, seed);
    region.validate();
    emit(out, new hm_region{std::move(region)});
  });
}

hm_status hm_region_points(const double* points, size_t count, size_t dim, hm_region** out) {
  return guard([&] {
    auto region = hc::RegionSpec::point_set(rows_of(points, count, dim));
    region.validate();
    emit(out, new hm_region{std::move(region)});
  });
}

void hm_region_free(hm_region* region) { delete region; }
size_t hm_region_size(const hm_region* region) { return region ? region->impl.size() : 0; }
size_t hm_region_dim(const hm_region* region) { return region ? region->impl.dimension() : 0; }

hm_status hm_gamma_region(const hm_model* model, const hm_region* region, const hm_ball_spec* spec,
                          const hm_projection* projection, const hm_run_options* options, hm_region_result** out) {
  return guard([&] {
    need(region, "region");
    auto r = hc::gamma_region(model_of(model), region->impl, to_core(spec), to_core(projection), to_core(options));
    emit(out, new hm_region_result{std::move(r)});
  });
}

void hm_region_result_free(hm_region_result* result) { delete result; }

void hm_region_result_summary(const hm_region_result* result, double* mean_gamma, double* std_error, size_t* count,
                              size_t* skipped) {
  if (!result) return;
  if (mean_gamma) *mean_gamma = result->impl.mean_gamma;
  if (std_error) *std_error = result->impl.std_error;
  if (count) *count = result->impl.count;
  if (skipped) *skipped = result->impl.skipped;
}

hm_status hm_region_result_point(const hm_region_result* result, size_t index, double* coords, size_t capacity,
                                 hm_gamma_result* gamma, int* ok) {
  return guard([&] {
    need(result, "result");
    if (index >= result->impl.per_point.size())
      hc::fail(hc::ErrorCode::InvalidArgument, "point " + std::to_string(index) + " out of range");
    const hc::PointGamma& p = result->impl.per_point[index];
    if (coords) {
      check_capacity(capacity, p.point.size());
      std::copy(p.point.begin(), p.point.end(), coords);
    }
    if (gamma) *gamma = {p.result.gamma, p.result.ball_count, p.result.std_error};
    if (ok) *ok = p.ok ? 1 : 0;
  });
}

hm_status hm_region_result_write_csv(const hm_region_result* result, const char* path) {
  return guard([&] {
    need(result, "result");
    write_to(path, [&](std::ostream& os) { hc::write_per_point_csv(os, result->impl); });
  });
}

hm_status hm_gamma_field(const hm_model* model, const hm_region* grid, const hm_ball_spec* spec,
                         const hm_projection* projection, const hm_run_options* options, hm_field** out) {
  return guard([&] {
    need(grid, "region");
    auto f = hc::gamma_field(model_of(model), grid->impl, to_core(spec), to_core(projection), to_core(options));
    emit(out, new hm_field{std::move(f)});
  });
}

void hm_field_free(hm_field* field) { delete field; }
size_t hm_field_size(const hm_field* field) { return field ? field->impl.values.size() : 0; }
size_t hm_field_skipped(const hm_field* field) { return field ? field->impl.skipped : 0; }

double hm_field_value(const hm_field* field, size_t index) {
  if (!field || index >= field->impl.values.size()) return std::numeric_limits<double>::quiet_NaN();
  return field->impl.values[index];
}

hm_status hm_field_write_csv(const hm_field* field, const char* path) {
  return guard([&] {
    need(field, "field");
    write_to(path, [&](std::ostream& os) { hc::write_field_csv(os, field->impl); });
  });
}

hm_status hm_radius_sweep(const hm_model* model, const hm_region* region, const double* radii, size_t radius_count,
                          const hm_ball_spec* spec, const hm_projection* projection, const hm_run_options* options,
                          hm_sweep_row* rows) {
  return guard([&] {
    need(region, "region");
    hc::BallSpec tmpl = to_core(spec);
    const auto table = hc::radius_sweep(model_of(model), region->impl, view(radii, radius_count), tmpl,
                                        to_core(projection), to_core(options));
    need(rows, "output rows");
    for (std::size_t i = 0; i < table.size(); ++i)
      rows[i] = {table[i].radius, table[i].mean_gamma, table[i].std_error, table[i].count, table[i].skipped};
  });
}

hm_status hm_write_sweep_csv(const hm_sweep_row* rows, size_t count, const char* path) {
  return guard([&] {
    if (count > 0) need(rows, "rows");
    std::vector<hc::SweepRow> table(count);
    for (std::size_t i = 0; i < count; ++i)
      table[i] = {rows[i].radius, rows[i].mean_gamma, rows[i].std_error, rows[i].count, rows[i].skipped};
    write_to(path, [&](std::ostream& os) { hc::write_sweep_csv(os, table); });
  });
}

hm_status hm_gamma_line_integral(const hm_model* model, const double* from, const double* to, size_t n,
                                 size_t intervals, const hm_ball_spec* spec, const hm_projection* projection,
                                 const hm_run_options* options, double* out) {
  return guard([&] {
    need(out, "output");
    *out = hc::gamma_line_integral(model_of(model), view(from, n), view(to, n), intervals, to_core(spec),
                                   to_core(projection), to_core(options));
  });
}

// ---- adversarial -----------------------------------------------------------

void hm_search_options_init(hm_search_options* options) {
  if (!options) return;
  options->jobs = 1;
  options->lenient = 0;
  options->early_exit_on_flip = 0;
  options->record_candidates = 0;
  options->domain_policy = HM_DOMAIN_AUTO;
}

hm_status hm_adversarial_search(const hm_model* model, const double* x, size_t n, const hm_ball_spec* spec,
                                size_t steps, const hm_projection* projection, const hm_search_options* options,
                                hm_trace** out) {
  return guard([&] {
    auto t = hc::adversarial_search(model_of(model), view(x, n), to_core(spec), steps, to_core(projection),
                                    search_options(options));
    emit(out, new hm_trace{std::move(t)});
  });
}

void hm_trace_free(hm_trace* trace) { delete trace; }
size_t hm_trace_length(const hm_trace* trace) { return trace ? trace->impl.steps.size() : 0; }
size_t hm_trace_dim(const hm_trace* trace) { return trace ? trace->impl.origin.size() : 0; }
int hm_trace_stable(const hm_trace* trace) { return trace && trace->impl.stable ? 1 : 0; }
int64_t hm_trace_origin_label(const hm_trace* trace) { return trace ? trace->impl.origin_label : 0; }

hm_status hm_trace_step_info(const hm_trace* trace, size_t step, hm_trace_step* info, double* point,
                             size_t capacity) {
  return guard([&] {
    const hc::AdversarialStep& s = step_of(trace, step);
    if (point) {
      check_capacity(capacity, s.point.size());
      std::copy(s.point.begin(), s.point.end(), point);
    }
    if (info)
      *info = {s.gamma, s.label, static_cast<int64_t>(s.changed_coord), s.delta, s.candidate_index,
               s.candidate_gammas.size()};
  });
}

hm_status hm_trace_candidate_gammas(const hm_trace* trace, size_t step, double* out, size_t capacity) {
  return guard([&] {
    const hc::AdversarialStep& s = step_of(trace, step);
    check_capacity(capacity, s.candidate_gammas.size());
    if (!s.candidate_gammas.empty()) need(out, "output");
    std::copy(s.candidate_gammas.begin(), s.candidate_gammas.end(), out);
  });
}

hm_status hm_trace_write_jsonl(const hm_trace* trace, const char* path) {
  return guard([&] {
    need(trace, "trace");
    write_to(path, [&](std::ostream& os) { hc::write_trace_jsonl(os, trace->impl); });
  });
}

hm_status hm_batch_stability(const hm_model* model, const double* xs, size_t count, size_t n, const int64_t* labels,
                             const unsigned char* has_label, const hm_ball_spec* spec, size_t steps,
                             const hm_projection* projection, const hm_search_options* options,
                             hm_batch_result** out) {
  return guard([&] {
    std::vector<hc::Sample> data(count);
    auto rows = rows_of(xs, count, n);
    for (std::size_t i = 0; i < count; ++i) {
      data[i].x = std::move(rows[i]);
      if (labels && (!has_label || has_label[i])) data[i].label = labels[i];
    }
    hc::BatchOptions opts;
    if (options) {
      opts.jobs = options->jobs == 0 ? 1 : options->jobs;
      opts.lenient = options->lenient != 0;
      opts.early_exit_on_flip = options->early_exit_on_flip != 0;
      opts.gamma.domain_policy = to_core(options->domain_policy);
    }
    auto r = hc::batch_stability(model_of(model), data, to_core(spec), steps, to_core(projection), opts);
    auto* result = new hm_batch_result{std::move(r), {}};
    result->traces.reserve(result->impl.traces.size());
    for (auto& t : result->impl.traces) result->traces.push_back(hm_trace{std::move(t)});
    result->impl.traces.clear();
    emit(out, result);
  });
}

void hm_batch_result_free(hm_batch_result* result) { delete result; }
uint64_t hm_sample_seed(uint64_t base, size_t index) { return hc::sample_seed(base, index); }
size_t hm_batch_stats_count(const hm_batch_result* result) { return result ? result->impl.stats.size() : 0; }
size_t hm_batch_record_count(const hm_batch_result* result) { return result ? result->impl.records.size() : 0; }
size_t hm_batch_skipped(const hm_batch_result* result) { return result ? result->impl.skipped : 0; }

hm_status hm_batch_stats(const hm_batch_result* result, size_t index, hm_stability_stats* out) {
  return guard([&] {
    need(result, "result");
    need(out, "output");
    if (index >= result->impl.stats.size()) hc::fail(hc::ErrorCode::InvalidArgument, "stats index out of range");
    const hc::StabilityStats& s = result->impl.stats[index];
    *out = {s.class_id,      s.count,      s.accuracy_pct ? 1 : 0,  s.accuracy_pct.value_or(0.0),
            s.stability_pct, s.mean_gamma, s.mean_prob,             s.predicted_stability,
            s.mean_class_logit, s.mean_other_logit};
  });
}

hm_status hm_batch_record(const hm_batch_result* result, size_t index, hm_sample_record* out) {
  return guard([&] {
    need(result, "result");
    need(out, "output");
    if (index >= result->impl.records.size()) hc::fail(hc::ErrorCode::InvalidArgument, "record index out of range");
    const hc::SampleRecord& r = result->impl.records[index];
    *out = {r.index, r.predicted_label, r.true_label ? 1 : 0, r.true_label.value_or(0), r.prob, r.gamma,
            r.stable ? 1 : 0, r.class_logit, r.mean_other_logit, r.mean_logit};
  });
}

const hm_trace* hm_batch_trace(const hm_batch_result* result, size_t index) {
  if (!result || index >= result->traces.size()) return nullptr;
  return &result->traces[index];
}

hm_status hm_batch_write_stats_csv(const hm_batch_result* result, const char* path, int with_logits) {
  return guard([&] {
    need(result, "result");
    write_to(path, [&](std::ostream& os) { hc::write_stats_csv(os, result->impl.stats, with_logits != 0); });
  });
}

hm_status hm_batch_write_records_csv(const hm_batch_result* result, const char* path) {
  return guard([&] {
    need(result, "result");
    write_to(path, [&](std::ostream& os) { hc::write_records_csv(os, result->impl.records); });
  });
}

// ---- analysis --------------------------------------------------------------

hm_status hm_softmax_prob(const double* logits, size_t m, size_t class_index, double* out) {
  return guard([&] {
    need(out, "output");
    *out = hc::softmax_prob(view(logits, m), class_index);
  });
}

hm_status hm_approx_prob(double class_logit, double mean_other_logit, size_t n_classes, double* out) {
  return guard([&] {
    need(out, "output");
    *out = hc::approx_prob(class_logit, mean_other_logit, n_classes);
  });
}

double hm_predicted_stability(double class_prob, double gamma, double steps) {
  return hc::predicted_stability(class_prob, gamma, steps);
}

hm_status hm_softmax_summary_of(const double* logits, size_t m, size_t class_index, int all_logits,
                                hm_softmax_summary* out) {
  return guard([&] {
    need(out, "output");
    const auto s = hc::softmax_summary(view(logits, m), class_index,
                                       all_logits ? hc::LogitAverage::All : hc::LogitAverage::NonClass);
    *out = {s.class_logit, s.mean_logit, s.class_prob, s.n_classes};
  });
}

hm_status hm_boundary_band_average(double r, double height, int quadrature, double* out) {
  return guard([&] {
    need(out, "output");
    *out = quadrature ? hc::boundary_band_average_quadrature(r, height) : hc::boundary_band_average(r, height);
  });
}

hm_status hm_boundary_band_integral(double r, int quadrature, double* out) {
  return guard([&] {
    need(out, "output");
    *out = quadrature ? hc::boundary_band_integral_quadrature(r) : hc::boundary_band_integral(r);
  });
}

hm_status hm_gamma_map_build(const hm_stability_record* records, size_t count, const double* prob_edges,
                             size_t prob_edge_count, const double* gamma_edges, size_t gamma_edge_count,
                             hm_gamma_map** out) {
  return guard([&] {
    const auto recs = records_of(records, count);
    auto pe = view(prob_edges, prob_edge_count);
    auto ge = view(gamma_edges, gamma_edge_count);
    auto map = hc::build_gamma_map(recs, hc::Vector(pe.begin(), pe.end()), hc::Vector(ge.begin(), ge.end()));
    emit(out, new hm_gamma_map{std::move(map)});
  });
}

hm_status hm_gamma_map_build_default(const hm_stability_record* records, size_t count, size_t prob_bins,
                                     size_t gamma_bins, hm_gamma_map** out) {
  return guard([&] {
    const auto recs = records_of(records, count);
    emit(out, new hm_gamma_map{hc::build_gamma_map(recs, prob_bins, gamma_bins)});
  });
}

void hm_gamma_map_free(hm_gamma_map* map) { delete map; }
size_t hm_gamma_map_prob_bins(const hm_gamma_map* map) { return map ? map->impl.prob_bins() : 0; }
size_t hm_gamma_map_gamma_bins(const hm_gamma_map* map) { return map ? map->impl.gamma_bins() : 0; }
size_t hm_gamma_map_total(const hm_gamma_map* map) { return map ? map->impl.total() : 0; }

hm_status hm_gamma_map_cell(const hm_gamma_map* map, size_t prob_bin, size_t gamma_bin, size_t* count,
                            size_t* stable_count) {
  return guard([&] {
    need(map, "map");
    if (prob_bin >= map->impl.prob_bins() || gamma_bin >= map->impl.gamma_bins())
      hc::fail(hc::ErrorCode::InvalidArgument, "cell index out of range");
    const auto& c = map->impl.cell(prob_bin, gamma_bin);
    if (count) *count = c.count;
    if (stable_count) *stable_count = c.stable_count;
  });
}

hm_status hm_gamma_map_merge(hm_gamma_map* into, const hm_gamma_map* other) {
  return guard([&] {
    need(into, "map");
    need(other, "map");
    into->impl.merge(other->impl);
  });
}

hm_status hm_gamma_map_lookup(const hm_gamma_map* map, double prob, double gamma, int nearest_fallback,
                              double* fraction, int* found) {
  return guard([&] {
    need(map, "map");
    const auto f = hc::lookup_stability(map->impl, prob, gamma,
                                        nearest_fallback ? hc::LookupFallback::NearestNonEmpty
                                                         : hc::LookupFallback::None);
    if (found) *found = f ? 1 : 0;
    if (fraction) *fraction = f.value_or(std::numeric_limits<double>::quiet_NaN());
  });
}

hm_status hm_gamma_map_write_csv(const hm_gamma_map* map, const char* path) {
  return guard([&] {
    need(map, "map");
    write_to(path, [&](std::ostream& os) { hc::write_gamma_map_csv(os, map->impl); });
  });
}

hm_status hm_write_simplex_csv(size_t n, const char* path) {
  return guard([&] {
    const auto basis = hc::simplex_vertices(n);
    write_to(path, [&](std::ostream& os) { hc::write_simplex_csv(os, basis); });
  });
}

}  // extern "C"
