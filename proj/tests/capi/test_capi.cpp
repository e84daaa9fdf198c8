// Exercises the shared library through the public C header only.
#include <doctest.h>
#include <harmonica/harmonica.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "support/support.hpp"

namespace {

hm_ball_spec ball(hm_scheme scheme, double r, uint64_t seed = 0) {
  hm_ball_spec s;
  hm_ball_spec_init(&s);
  s.scheme = scheme;
  s.radius = r;
  s.seed = seed;
  return s;
}

hm_model* builtin(const char* name, size_t n, const char* params = nullptr) {
  hm_model* m = nullptr;
  REQUIRE(hm_model_builtin(name, n, params, &m) == HM_OK);
  return m;
}

const hm_projection kScalar{HM_PROJECT_SCALAR, 0};

}  // namespace

TEST_CASE("status reporting") {
  hm_model* m = reinterpret_cast<hm_model*>(0x1);
  CHECK(hm_model_builtin("f1", 3, nullptr, &m) == HM_ERR_INVALID_DIMENSION);
  CHECK(m == reinterpret_cast<hm_model*>(0x1));  // untouched on failure
  CHECK(std::string(hm_last_error()).find("even") != std::string::npos);
  CHECK(std::string(hm_status_string(HM_ERR_TIMEOUT)) == "timeout");
  CHECK(hm_model_builtin("f2", 3, "level", &m) == HM_ERR_PARSE);
  CHECK(hm_model_builtin(nullptr, 3, nullptr, &m) == HM_ERR_INVALID_ARGUMENT);
  // The message is per thread.
  std::string other;
  std::thread([&] {
    hm_model* x = nullptr;
    hm_model_builtin("nope", 2, nullptr, &x);
    other = hm_last_error();
  }).join();
  CHECK(other.find("nope") != std::string::npos);
  CHECK(std::string(hm_last_error()).find("nope") == std::string::npos);
}

TEST_CASE("geometry") {
  std::vector<double> v(3 * 2);
  REQUIRE(hm_simplex_vertices(2, v.data(), v.size()) == HM_OK);
  for (int k = 0; k < 3; ++k) CHECK(std::hypot(v[2 * k], v[2 * k + 1]) == doctest::Approx(1.0));
  CHECK(hm_simplex_vertices(2, v.data(), 5) == HM_ERR_INVALID_ARGUMENT);

  hm_scheme s;
  REQUIRE(hm_parse_scheme("hypercube-sampled", &s) == HM_OK);
  CHECK(s == HM_SCHEME_HYPERCUBE_SAMPLED);
  CHECK(std::string(hm_scheme_name(HM_SCHEME_SIMPLEX_ANTI)) == "simplex-anti");
  CHECK(hm_parse_scheme("blob", &s) == HM_ERR_INVALID_ARGUMENT);

  hm_ball_spec spec = ball(HM_SCHEME_HYPERCUBE, 0.5);
  size_t count = 0;
  REQUIRE(hm_ball_size(3, &spec, &count) == HM_OK);
  CHECK(count == 6);
  const double c[3] = {1, 1, 1};
  std::vector<double> pts(count * 3);
  REQUIRE(hm_ball_points(c, 3, &spec, pts.data(), pts.size()) == HM_OK);
  CHECK(pts[0] == 1.5);
  CHECK(pts[3] == 0.5);
  double centrality = -1, isotropy = -1;
  REQUIRE(hm_coverage_metrics(pts.data(), count, c, 3, &centrality, &isotropy) == HM_OK);
  CHECK(centrality == doctest::Approx(0.0).scale(1e-12));

  std::vector<double> rot(4);
  const double e0[2] = {1, 0}, e1[2] = {0, 1};
  REQUIRE(hm_rodrigues_rotation(e0, e1, 2, M_PI / 2, rot.data(), rot.size()) == HM_OK);
  CHECK(rot[2] == doctest::Approx(1.0));  // R e0 = e1, row-major

  spec.scheme = HM_SCHEME_CIRCLE;
  CHECK(hm_ball_size(3, &spec, &count) == HM_ERR_INVALID_DIMENSION);
}

TEST_CASE("models and projections") {
  hm_model* m = builtin("linear", 3, "a=1:2:3");
  CHECK(hm_model_input_dim(m) == 3);
  CHECK(hm_model_output_dim(m) == 1);
  CHECK(hm_model_backend(m) == HM_BACKEND_BUILTIN);
  const double xs[6] = {1, 1, 1, 0, 0, 2};
  double ys[2];
  REQUIRE(hm_model_eval_batch(m, xs, 2, 3, ys, 2) == HM_OK);
  CHECK(ys[0] == 6);
  CHECK(ys[1] == 6);
  double y;
  CHECK(hm_model_eval(m, xs, 2, &y, 1) == HM_ERR_INVALID_DIMENSION);
  const double lo[3] = {0, 0, 0}, hi[3] = {1, 1, 1};
  REQUIRE(hm_model_set_domain(m, lo, hi, 1) == HM_OK);
  const double out_of_box[3] = {3, 0.4, 0.6};
  REQUIRE(hm_model_eval(m, out_of_box, 3, &y, 1) == HM_OK);
  CHECK(y == 4);  // (1, 0, 1)
  hm_model_free(m);

  hm_projection p;
  REQUIRE(hm_parse_projection("component:2", &p) == HM_OK);
  CHECK(p.mode == HM_PROJECT_COMPONENT);
  CHECK(p.component == 2);
  CHECK(hm_default_projection(5).mode == HM_PROJECT_CLASS_LOGIT);
  const double logits[3] = {1, 5, 2};
  double v;
  REQUIRE(hm_project(logits, 3, &p, nullptr, &v) == HM_OK);
  CHECK(v == 2);
  const hm_projection cl{HM_PROJECT_CLASS_LOGIT, 0};
  REQUIRE(hm_project(logits, 3, &cl, logits, &v) == HM_OK);
  CHECK(v == 5);

  testing::TempDir dir;
  const std::string path = dir.file("m.json");
  std::ofstream(path) << R"({"layers":[{"rows":1,"cols":2,"weights":[2,3],"bias":[1],"activation":"identity"}]})";
  REQUIRE(hm_model_load_mlp(path.c_str(), &m) == HM_OK);
  CHECK(hm_model_backend(m) == HM_BACKEND_MLP);
  const double x2[2] = {1, 1};
  REQUIRE(hm_model_eval(m, x2, 2, &y, 1) == HM_OK);
  CHECK(y == 6);
  hm_model_free(m);
  CHECK(hm_model_load_mlp(dir.file("missing.json").c_str(), &m) == HM_ERR_IO);
}

TEST_CASE("external models") {
  hm_external_options opts;
  hm_external_options_init(&opts);
  CHECK(opts.pool_size == 1);
  const std::string cmd = testing::fake_model() + " --dim 3";
  hm_model* sub = nullptr;
  REQUIRE(hm_model_subprocess(cmd.c_str(), &opts, &sub) == HM_OK);
  CHECK(hm_model_backend(sub) == HM_BACKEND_SUBPROCESS);
  testing::HttpFake server({"--dim", "3"});
  hm_model* http = nullptr;
  REQUIRE(hm_model_http(server.url().c_str(), &opts, &http) == HM_OK);
  const double x[3] = {0.5, -1, 2};
  double a[3], b[3];
  REQUIRE(hm_model_eval(sub, x, 3, a, 3) == HM_OK);
  REQUIRE(hm_model_eval(http, x, 3, b, 3) == HM_OK);
  for (int i = 0; i < 3; ++i) CHECK(a[i] == b[i]);
  hm_model_free(sub);
  hm_model_free(http);
  const std::string noisy = testing::fake_model() + " --dim 3 --mode noisy";
  CHECK(hm_model_subprocess(noisy.c_str(), &opts, &sub) == HM_ERR_NON_DETERMINISTIC);
}

TEST_CASE("gamma") {
  hm_model* f2 = builtin("f2", 2);
  const hm_ball_spec spec = ball(HM_SCHEME_SIMPLEX, 0.3);
  const double x[2] = {0.2, 0.4};
  hm_gamma_result g;
  REQUIRE(hm_gamma_point(f2, x, 2, &spec, &kScalar, nullptr, &g) == HM_OK);
  CHECK(g.gamma == doctest::Approx(0.09));

  const double lo[2] = {0, 0}, hi[2] = {1, 1};
  const size_t counts[2] = {3, 4};
  hm_region* grid = nullptr;
  REQUIRE(hm_region_grid(2, lo, hi, counts, &grid) == HM_OK);
  CHECK(hm_region_size(grid) == 12);
  CHECK(hm_region_dim(grid) == 2);
  hm_run_options ro;
  hm_run_options_init(&ro);
  ro.jobs = 3;
  hm_region_result* rr = nullptr;
  REQUIRE(hm_gamma_region(f2, grid, &spec, &kScalar, &ro, &rr) == HM_OK);
  double mean, se;
  size_t count, skipped;
  hm_region_result_summary(rr, &mean, &se, &count, &skipped);
  CHECK(mean == doctest::Approx(0.09));
  CHECK(count == 12);
  double coords[2];
  int ok = 0;
  REQUIRE(hm_region_result_point(rr, 5, coords, 2, &g, &ok) == HM_OK);
  CHECK(ok == 1);
  CHECK(coords[0] == 0.5);
  CHECK(hm_region_result_point(rr, 12, coords, 2, &g, &ok) == HM_ERR_INVALID_ARGUMENT);

  testing::TempDir dir;
  REQUIRE(hm_region_result_write_csv(rr, dir.file("pp.csv").c_str()) == HM_OK);
  const std::string csv = testing::slurp(dir.file("pp.csv"));
  CHECK(csv.rfind("idx,dim0,dim1,gamma,stderr,ball_count\n", 0) == 0);
  hm_region_result_free(rr);

  hm_field* field = nullptr;
  REQUIRE(hm_gamma_field(f2, grid, &spec, &kScalar, nullptr, &field) == HM_OK);
  CHECK(hm_field_size(field) == 12);
  CHECK(hm_field_value(field, 11) == doctest::Approx(0.09));
  REQUIRE(hm_field_write_csv(field, dir.file("field.csv").c_str()) == HM_OK);
  CHECK(testing::slurp(dir.file("field.csv")).rfind("dim0,dim1,gamma\n", 0) == 0);
  hm_field_free(field);

  const double radii[3] = {0.1, 0.2, 0.4};
  hm_sweep_row rows[3];
  REQUIRE(hm_radius_sweep(f2, grid, radii, 3, &spec, &kScalar, nullptr, rows) == HM_OK);
  CHECK(rows[2].mean_gamma == doctest::Approx(0.16));
  REQUIRE(hm_write_sweep_csv(rows, 3, dir.file("sweep.csv").c_str()) == HM_OK);
  CHECK(testing::slurp(dir.file("sweep.csv")).rfind("radius,mean_gamma,stderr\n0.1,", 0) == 0);
  hm_region_free(grid);

  double integral = 0;
  const double from[2] = {0, 0}, to[2] = {3, 4};
  REQUIRE(hm_gamma_line_integral(f2, from, to, 2, 10, &spec, &kScalar, nullptr, &integral) == HM_OK);
  CHECK(integral == doctest::Approx(5 * 0.09));

  // A failed write leaves no file behind.
  CHECK(hm_write_sweep_csv(rows, 3, (dir.file("no/such/dir") + "/s.csv").c_str()) == HM_ERR_IO);
  hm_model_free(f2);
}

TEST_CASE("adversarial search and batches") {
  hm_model* step = builtin("step2d", 2, "level=1.5");
  const hm_ball_spec spec = ball(HM_SCHEME_HYPERCUBE, 0.05);
  hm_search_options so;
  hm_search_options_init(&so);
  so.record_candidates = 1;
  const double x[2] = {2.5, 1.35};
  hm_trace* t = nullptr;
  REQUIRE(hm_adversarial_search(step, x, 2, &spec, 4, &kScalar, &so, &t) == HM_OK);
  CHECK(hm_trace_length(t) == 4);
  CHECK(hm_trace_dim(t) == 2);
  CHECK(hm_trace_stable(t) == 1);
  CHECK(hm_trace_origin_label(t) == 0);
  hm_trace_step info;
  double pt[2];
  REQUIRE(hm_trace_step_info(t, 0, &info, pt, 2) == HM_OK);
  CHECK(info.changed_coord == 0);
  CHECK(info.delta == 0.05);
  CHECK(info.candidate_count == 4);
  CHECK(pt[0] == 2.55);
  double cg[4];
  REQUIRE(hm_trace_candidate_gammas(t, 0, cg, 4) == HM_OK);
  CHECK(cg[0] == 0.0);
  CHECK(hm_trace_step_info(t, 4, &info, nullptr, 0) == HM_ERR_INVALID_ARGUMENT);
  testing::TempDir dir;
  REQUIRE(hm_trace_write_jsonl(t, dir.file("t.jsonl").c_str()) == HM_OK);
  CHECK(testing::slurp(dir.file("t.jsonl")).rfind(R"({"step":1,"gamma":0,"label":0,"changed_coord":0,"delta":0.05})", 0) == 0);
  hm_trace_free(t);
  CHECK(hm_adversarial_search(step, x, 2, &spec, 0, &kScalar, &so, &t) == HM_ERR_PRECONDITION);

  const double xs[6] = {2.5, 1.0, 2.5, 2.0, 1.0, 1.49};
  const int64_t labels[3] = {0, 1, 1};
  const unsigned char has[3] = {1, 1, 0};
  hm_batch_result* br = nullptr;
  REQUIRE(hm_batch_stability(step, xs, 3, 2, labels, has, &spec, 3, &kScalar, &so, &br) == HM_OK);
  CHECK(hm_batch_record_count(br) == 3);
  CHECK(hm_batch_skipped(br) == 0);
  CHECK(hm_batch_stats_count(br) == 2);
  hm_sample_record rec;
  REQUIRE(hm_batch_record(br, 1, &rec) == HM_OK);
  CHECK(rec.predicted_label == 1);
  CHECK(rec.has_true_label == 1);
  CHECK(rec.prob == 1.0);
  REQUIRE(hm_batch_record(br, 2, &rec) == HM_OK);
  CHECK(rec.has_true_label == 0);
  hm_stability_stats st;
  REQUIRE(hm_batch_stats(br, 0, &st) == HM_OK);
  CHECK(st.class_id == 0);
  CHECK(st.count == 2);
  CHECK(st.has_accuracy == 1);
  CHECK(st.accuracy_pct == 100.0);
  CHECK(hm_trace_length(hm_batch_trace(br, 0)) == 3);
  REQUIRE(hm_batch_write_stats_csv(br, dir.file("stats.csv").c_str(), 1) == HM_OK);
  CHECK(testing::slurp(dir.file("stats.csv"))
            .rfind("class,count,accuracy_pct,stability_pct,mean_gamma,mean_prob,predicted_stability,"
                   "mean_class_logit,mean_other_logit\n",
                   0) == 0);
  REQUIRE(hm_batch_write_records_csv(br, dir.file("records.csv").c_str()) == HM_OK);
  CHECK(testing::slurp(dir.file("records.csv")).rfind("index,label,true_label,prob,gamma,stable\n0,0,0,1,", 0) == 0);
  hm_batch_result_free(br);
  CHECK(hm_sample_seed(7, 1) != hm_sample_seed(7, 2));
  hm_model_free(step);
}

TEST_CASE("analysis and gamma map") {
  double p;
  const double logits[3] = {1, 1, 1};
  REQUIRE(hm_softmax_prob(logits, 3, 0, &p) == HM_OK);
  CHECK(p == doctest::Approx(1.0 / 3));
  REQUIRE(hm_approx_prob(8.91, 0, 1000, &p) == HM_OK);
  CHECK(p == doctest::Approx(0.8811).epsilon(1e-4));
  CHECK(hm_predicted_stability(0.881, 0.027, 25) == doctest::Approx(0.45).epsilon(0.01));
  hm_softmax_summary sm;
  const double l4[4] = {4, 1, 2, 3};
  REQUIRE(hm_softmax_summary_of(l4, 4, 0, 1, &sm) == HM_OK);
  CHECK(sm.mean_logit == 2.5);
  REQUIRE(hm_boundary_band_average(0.05, 3, 1, &p) == HM_OK);
  CHECK(p == doctest::Approx(0.1 / (3 * M_PI)).epsilon(1e-6));
  CHECK(hm_boundary_band_average(2, 3, 0, &p) == HM_ERR_BAND_OVERLAP);
  REQUIRE(hm_boundary_band_integral(0.05, 0, &p) == HM_OK);
  CHECK(p == doctest::Approx(0.1 / M_PI));

  const hm_stability_record recs[4] = {{0.1, 0.01, 1}, {0.1, 0.01, 0}, {0.9, 0.09, 1}, {0.9, 0.02, 1}};
  const double pe[3] = {0, 0.5, 1}, ge[3] = {0, 0.05, 0.1};
  hm_gamma_map* map = nullptr;
  REQUIRE(hm_gamma_map_build(recs, 4, pe, 3, ge, 3, &map) == HM_OK);
  CHECK(hm_gamma_map_prob_bins(map) == 2);
  CHECK(hm_gamma_map_total(map) == 4);
  size_t count, stable;
  REQUIRE(hm_gamma_map_cell(map, 0, 0, &count, &stable) == HM_OK);
  CHECK(count == 2);
  CHECK(stable == 1);
  double f;
  int found;
  REQUIRE(hm_gamma_map_lookup(map, 0.2, 0.07, 0, &f, &found) == HM_OK);
  CHECK(found == 0);
  REQUIRE(hm_gamma_map_lookup(map, 0.2, 0.07, 1, &f, &found) == HM_OK);
  CHECK(found == 1);
  CHECK(f == 0.5);
  hm_gamma_map* other = nullptr;
  REQUIRE(hm_gamma_map_build(recs, 4, pe, 3, ge, 3, &other) == HM_OK);
  REQUIRE(hm_gamma_map_merge(map, other) == HM_OK);
  CHECK(hm_gamma_map_total(map) == 8);
  hm_gamma_map_free(other);
  REQUIRE(hm_gamma_map_build_default(recs, 4, 3, 3, &other) == HM_OK);
  CHECK(hm_gamma_map_merge(map, other) == HM_ERR_INVALID_ARGUMENT);
  hm_gamma_map_free(other);
  testing::TempDir dir;
  REQUIRE(hm_gamma_map_write_csv(map, dir.file("map.csv").c_str()) == HM_OK);
  const std::string csv = testing::slurp(dir.file("map.csv"));
  CHECK(csv.rfind("prob_lo,prob_hi,gamma_lo,gamma_hi,count,stable_count,fraction\n0,0.5,0,0.05,4,2,0.5\n", 0) == 0);
  CHECK(csv.find("0,0.5,0.05,0.1,0,0,\n") != std::string::npos);
  hm_gamma_map_free(map);

  REQUIRE(hm_write_simplex_csv(3, dir.file("s.csv").c_str()) == HM_OK);
  CHECK(testing::slurp(dir.file("s.csv")).rfind("dim0,dim1,dim2\n", 0) == 0);
}

TEST_CASE("images") {
  testing::TempDir dir;
  const double px[6] = {0, 50, 100, 150, 200, 250};
  REQUIRE(hm_write_pgm(dir.file("a.pgm").c_str(), 3, 2, px) == HM_OK);
  size_t w = 0, h = 0;
  REQUIRE(hm_pgm_size(dir.file("a.pgm").c_str(), &w, &h) == HM_OK);
  CHECK(w == 3);
  CHECK(h == 2);
  double out[6];
  REQUIRE(hm_load_grayscale_image(dir.file("a.pgm").c_str(), 3, 2, out, 6) == HM_OK);
  CHECK(out[5] == 250);
  CHECK(hm_load_grayscale_image(dir.file("a.pgm").c_str(), 3, 2, out, 5) == HM_ERR_INVALID_ARGUMENT);
  CHECK(hm_pgm_size(dir.file("b.pgm").c_str(), &w, &h) == HM_ERR_IO);
}
