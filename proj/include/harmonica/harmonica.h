#ifndef HARMONICA_HARMONICA_H
#define HARMONICA_HARMONICA_H

#include <stddef.h>
#include <stdint.h>

#if defined(HARMONICA_BUILDING_LIBRARY)
#define HM_API __attribute__((visibility("default")))
#else
#define HM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Every fallible call returns a status; on failure hm_last_error() holds the
 * message for the calling thread until its next failing call. Output
 * arguments are untouched on failure. Buffers are sized by the caller and
 * the capacity is passed alongside; a short buffer is HM_ERR_INVALID_ARGUMENT. */
typedef enum hm_status {
  HM_OK = 0,
  HM_ERR_INVALID_ARGUMENT = 1,
  HM_ERR_INVALID_DIMENSION = 2,
  HM_ERR_PRECONDITION = 3,
  HM_ERR_EMPTY_BALL = 4,
  HM_ERR_PARSE = 5,
  HM_ERR_IO = 6,
  HM_ERR_BACKEND = 7,
  HM_ERR_TIMEOUT = 8,
  HM_ERR_NON_DETERMINISTIC = 9,
  HM_ERR_NON_FINITE = 10,
  HM_ERR_BAND_OVERLAP = 11,
  HM_ERR_INTERNAL = 99
} hm_status;

HM_API const char* hm_last_error(void);
HM_API const char* hm_status_string(hm_status status);

typedef struct hm_model hm_model;
typedef struct hm_region hm_region;
typedef struct hm_region_result hm_region_result;
typedef struct hm_field hm_field;
typedef struct hm_trace hm_trace;
typedef struct hm_batch_result hm_batch_result;
typedef struct hm_gamma_map hm_gamma_map;

/* ---- geometry ---------------------------------------------------------- */

typedef enum hm_scheme {
  HM_SCHEME_SIMPLEX = 0,
  HM_SCHEME_SIMPLEX_ANTI = 1,
  HM_SCHEME_RANDOM = 2,
  HM_SCHEME_HYPERCUBE = 3,         /* signed one-hot, 2n points */
  HM_SCHEME_HYPERCUBE_SAMPLED = 4, /* seeded subset of the one-hot set */
  HM_SCHEME_CIRCLE = 5             /* 2-D only, circle_points equally spaced */
} hm_scheme;

typedef struct hm_ball_spec {
  hm_scheme scheme;
  double radius;
  double sample_fraction;
  uint64_t seed;
  size_t circle_points;
  int onehot_limit; /* n >= 4096: simplex schemes become the one-hot set */
} hm_ball_spec;

HM_API void hm_ball_spec_init(hm_ball_spec* spec);
/* Names: simplex, simplex-anti, random, hypercube, hypercube-sampled, circle. */
HM_API hm_status hm_parse_scheme(const char* name, hm_scheme* out);
HM_API const char* hm_scheme_name(hm_scheme scheme);

/* out receives (n+1) rows of n coordinates. */
HM_API hm_status hm_simplex_vertices(size_t n, double* out, size_t capacity);
/* out receives the n x n row-major matrix. */
HM_API hm_status hm_rodrigues_rotation(const double* n1, const double* n2, size_t n, double theta,
                                       double* out, size_t capacity);
HM_API hm_status hm_ball_size(size_t n, const hm_ball_spec* spec, size_t* out);
/* out receives hm_ball_size() rows of n coordinates. */
HM_API hm_status hm_ball_points(const double* center, size_t n, const hm_ball_spec* spec, double* out,
                                size_t capacity);
HM_API hm_status hm_coverage_metrics(const double* points, size_t count, const double* center, size_t n,
                                     double* centrality, double* isotropy);

/* ---- models ------------------------------------------------------------ */

typedef enum hm_backend {
  HM_BACKEND_BUILTIN = 0,
  HM_BACKEND_MLP = 1,
  HM_BACKEND_SUBPROCESS = 2,
  HM_BACKEND_HTTP = 3
} hm_backend;

typedef struct hm_external_options {
  size_t input_dim;  /* 0 = accept the handshake */
  size_t output_dim; /* 0 = accept the handshake */
  size_t pool_size;
  double timeout_seconds;
  int probe_determinism;
} hm_external_options;

HM_API void hm_external_options_init(hm_external_options* options);

/* name: f1 f2 f3 f4 linear constant step2d curve2d. params: "key=value,..."
 * with keys a (':'-separated list), b, c, level, amplitude, omega; may be NULL. */
HM_API hm_status hm_model_builtin(const char* name, size_t n, const char* params, hm_model** out);
HM_API hm_status hm_model_load_mlp(const char* path, hm_model** out);
HM_API hm_status hm_model_subprocess(const char* command, const hm_external_options* options, hm_model** out);
HM_API hm_status hm_model_http(const char* url, const hm_external_options* options, hm_model** out);
HM_API void hm_model_free(hm_model* model);

HM_API size_t hm_model_input_dim(const hm_model* model);
HM_API size_t hm_model_output_dim(const hm_model* model);
HM_API hm_backend hm_model_backend(const hm_model* model);
/* Bounds of length input_dim; quantized rounds then clamps every input. */
HM_API hm_status hm_model_set_domain(hm_model* model, const double* lower, const double* upper, int quantized);
/* Integer pixels in [0, 255]. */
HM_API hm_status hm_model_set_pixel_domain(hm_model* model);
HM_API hm_status hm_model_eval(const hm_model* model, const double* x, size_t n, double* y, size_t m);
/* xs: count rows of n; ys: count rows of m. */
HM_API hm_status hm_model_eval_batch(const hm_model* model, const double* xs, size_t count, size_t n, double* ys,
                                     size_t capacity);

typedef enum hm_projection_mode {
  HM_PROJECT_SCALAR = 0,
  HM_PROJECT_COMPONENT = 1,
  HM_PROJECT_CLASS_LOGIT = 2,
  HM_PROJECT_NORM = 3
} hm_projection_mode;

typedef struct hm_projection {
  hm_projection_mode mode;
  size_t component;
} hm_projection;

/* "scalar", "norm", "class-logit" or "component:K". */
HM_API hm_status hm_parse_projection(const char* text, hm_projection* out);
HM_API hm_projection hm_default_projection(size_t output_dim);
HM_API hm_status hm_project(const double* output, size_t m, const hm_projection* projection,
                            const double* anchor, double* out);

/* Row-major target_w * target_h integer pixels (bilinear rescale). */
HM_API hm_status hm_load_grayscale_image(const char* path, size_t target_w, size_t target_h, double* out,
                                         size_t capacity);
HM_API hm_status hm_pgm_size(const char* path, size_t* width, size_t* height);
HM_API hm_status hm_write_pgm(const char* path, size_t width, size_t height, const double* pixels);

/* ---- gamma ------------------------------------------------------------- */

typedef enum hm_domain_policy { HM_DOMAIN_AUTO = 0, HM_DOMAIN_CLAMP = 1, HM_DOMAIN_SKIP = 2 } hm_domain_policy;

typedef struct hm_run_options {
  size_t jobs;
  int lenient;
  hm_domain_policy domain_policy;
} hm_run_options;

HM_API void hm_run_options_init(hm_run_options* options);

typedef struct hm_gamma_result {
  double gamma;
  size_t ball_count;
  double std_error;
} hm_gamma_result;

HM_API hm_status hm_gamma_point(const hm_model* model, const double* x, size_t n, const hm_ball_spec* spec,
                                const hm_projection* projection, const hm_run_options* options,
                                hm_gamma_result* out);

/* Bounds are arrays of length dim. Grid counts are nodes per dimension. */
HM_API hm_status hm_region_grid(size_t dim, const double* lo, const double* hi, const size_t* counts,
                                hm_region** out);
HM_API hm_status hm_region_monte_carlo(size_t dim, const double* lo, const double* hi, size_t count,
                                       uint64_t seed, hm_region** out);
HM_API hm_status hm_region_points(const double* points, size_t count, size_t dim, hm_region** out);
HM_API void hm_region_free(hm_region* region);
HM_API size_t hm_region_size(const hm_region* region);
HM_API size_t hm_region_dim(const hm_region* region);

HM_API hm_status hm_gamma_region(const hm_model* model, const hm_region* region, const hm_ball_spec* spec,
                                 const hm_projection* projection, const hm_run_options* options,
                                 hm_region_result** out);
HM_API void hm_region_result_free(hm_region_result* result);
HM_API void hm_region_result_summary(const hm_region_result* result, double* mean_gamma, double* std_error,
                                     size_t* count, size_t* skipped);
/* coords receives dim values; ok is 0 for a point skipped in lenient mode. */
HM_API hm_status hm_region_result_point(const hm_region_result* result, size_t index, double* coords,
                                        size_t capacity, hm_gamma_result* gamma, int* ok);
/* idx,dim0..,gamma,stderr,ball_count; path "-" is stdout. */
HM_API hm_status hm_region_result_write_csv(const hm_region_result* result, const char* path);

HM_API hm_status hm_gamma_field(const hm_model* model, const hm_region* grid, const hm_ball_spec* spec,
                                const hm_projection* projection, const hm_run_options* options, hm_field** out);
HM_API void hm_field_free(hm_field* field);
HM_API size_t hm_field_size(const hm_field* field);
HM_API size_t hm_field_skipped(const hm_field* field);
/* NaN for a skipped node. */
HM_API double hm_field_value(const hm_field* field, size_t index);
HM_API hm_status hm_field_write_csv(const hm_field* field, const char* path);

typedef struct hm_sweep_row {
  double radius;
  double mean_gamma;
  double std_error;
  size_t count;
  size_t skipped;
} hm_sweep_row;

/* rows receives one entry per radius. */
HM_API hm_status hm_radius_sweep(const hm_model* model, const hm_region* region, const double* radii,
                                 size_t radius_count, const hm_ball_spec* spec, const hm_projection* projection,
                                 const hm_run_options* options, hm_sweep_row* rows);
HM_API hm_status hm_write_sweep_csv(const hm_sweep_row* rows, size_t count, const char* path);

HM_API hm_status hm_gamma_line_integral(const hm_model* model, const double* from, const double* to, size_t n,
                                        size_t intervals, const hm_ball_spec* spec,
                                        const hm_projection* projection, const hm_run_options* options,
                                        double* out);

/* ---- adversarial ------------------------------------------------------- */

typedef struct hm_search_options {
  size_t jobs;
  int lenient; /* batch only: skip failing samples */
  int early_exit_on_flip;
  int record_candidates;
  hm_domain_policy domain_policy;
} hm_search_options;

HM_API void hm_search_options_init(hm_search_options* options);

HM_API hm_status hm_adversarial_search(const hm_model* model, const double* x, size_t n, const hm_ball_spec* spec,
                                       size_t steps, const hm_projection* projection,
                                       const hm_search_options* options, hm_trace** out);
HM_API void hm_trace_free(hm_trace* trace);

typedef struct hm_trace_step {
  double gamma;
  int64_t label;
  int64_t changed_coord; /* -1 unless the ball is one-hot */
  double delta;
  size_t candidate_index;
  size_t candidate_count; /* recorded candidate gammas, 0 unless requested */
} hm_trace_step;

HM_API size_t hm_trace_length(const hm_trace* trace);
HM_API size_t hm_trace_dim(const hm_trace* trace);
HM_API int hm_trace_stable(const hm_trace* trace);
HM_API int64_t hm_trace_origin_label(const hm_trace* trace);
/* point may be NULL; otherwise receives dim coordinates. */
HM_API hm_status hm_trace_step_info(const hm_trace* trace, size_t step, hm_trace_step* info, double* point,
                                    size_t capacity);
HM_API hm_status hm_trace_candidate_gammas(const hm_trace* trace, size_t step, double* out, size_t capacity);
HM_API hm_status hm_trace_write_jsonl(const hm_trace* trace, const char* path);

typedef struct hm_stability_stats {
  int64_t class_id;
  size_t count;
  int has_accuracy;
  double accuracy_pct;
  double stability_pct;
  double mean_gamma;
  double mean_prob;
  double predicted_stability;
  double mean_class_logit;
  double mean_other_logit;
} hm_stability_stats;

typedef struct hm_sample_record {
  size_t index;
  int64_t predicted_label;
  int has_true_label;
  int64_t true_label;
  double prob;
  double gamma;
  int stable;
  double class_logit;
  double mean_other_logit;
  double mean_logit;
} hm_sample_record;

/* xs: count rows of n. labels may be NULL; has_label (may be NULL = all)
 * marks which labels are present. Sample i uses seed hm_sample_seed(spec.seed, i). */
HM_API hm_status hm_batch_stability(const hm_model* model, const double* xs, size_t count, size_t n,
                                    const int64_t* labels, const unsigned char* has_label,
                                    const hm_ball_spec* spec, size_t steps, const hm_projection* projection,
                                    const hm_search_options* options, hm_batch_result** out);
HM_API void hm_batch_result_free(hm_batch_result* result);
HM_API uint64_t hm_sample_seed(uint64_t base, size_t index);
HM_API size_t hm_batch_stats_count(const hm_batch_result* result);
HM_API hm_status hm_batch_stats(const hm_batch_result* result, size_t index, hm_stability_stats* out);
HM_API size_t hm_batch_record_count(const hm_batch_result* result);
HM_API size_t hm_batch_skipped(const hm_batch_result* result);
HM_API hm_status hm_batch_record(const hm_batch_result* result, size_t index, hm_sample_record* out);
/* Borrowed; valid while the result lives. */
HM_API const hm_trace* hm_batch_trace(const hm_batch_result* result, size_t index);
HM_API hm_status hm_batch_write_stats_csv(const hm_batch_result* result, const char* path, int with_logits);
HM_API hm_status hm_batch_write_records_csv(const hm_batch_result* result, const char* path);

/* ---- analysis ---------------------------------------------------------- */

HM_API hm_status hm_softmax_prob(const double* logits, size_t m, size_t class_index, double* out);
HM_API hm_status hm_approx_prob(double class_logit, double mean_other_logit, size_t n_classes, double* out);
HM_API double hm_predicted_stability(double class_prob, double gamma, double steps);

typedef struct hm_softmax_summary {
  double class_logit;
  double mean_logit;
  double class_prob;
  size_t n_classes;
} hm_softmax_summary;

/* all_logits = 0 averages the non-class logits, 1 averages every logit. */
HM_API hm_status hm_softmax_summary_of(const double* logits, size_t m, size_t class_index, int all_logits,
                                       hm_softmax_summary* out);

/* quadrature = 1 evaluates the arccos band integral numerically. */
HM_API hm_status hm_boundary_band_average(double r, double height, int quadrature, double* out);
HM_API hm_status hm_boundary_band_integral(double r, int quadrature, double* out);

typedef struct hm_stability_record {
  double prob;
  double gamma;
  int stable;
} hm_stability_record;

HM_API hm_status hm_gamma_map_build(const hm_stability_record* records, size_t count, const double* prob_edges,
                                    size_t prob_edge_count, const double* gamma_edges, size_t gamma_edge_count,
                                    hm_gamma_map** out);
/* Probability uniform on [0,1]; gamma uniform on [0, p99 of observed gamma]. */
HM_API hm_status hm_gamma_map_build_default(const hm_stability_record* records, size_t count, size_t prob_bins,
                                            size_t gamma_bins, hm_gamma_map** out);
HM_API void hm_gamma_map_free(hm_gamma_map* map);
HM_API size_t hm_gamma_map_prob_bins(const hm_gamma_map* map);
HM_API size_t hm_gamma_map_gamma_bins(const hm_gamma_map* map);
HM_API size_t hm_gamma_map_total(const hm_gamma_map* map);
HM_API hm_status hm_gamma_map_cell(const hm_gamma_map* map, size_t prob_bin, size_t gamma_bin, size_t* count,
                                   size_t* stable_count);
HM_API hm_status hm_gamma_map_merge(hm_gamma_map* into, const hm_gamma_map* other);
/* found = 0 for an empty cell (no fallback) or an empty map. */
HM_API hm_status hm_gamma_map_lookup(const hm_gamma_map* map, double prob, double gamma, int nearest_fallback,
                                     double* fraction, int* found);
HM_API hm_status hm_gamma_map_write_csv(const hm_gamma_map* map, const char* path);

HM_API hm_status hm_write_simplex_csv(size_t n, const char* path);

#ifdef __cplusplus
}
#endif

#endif
