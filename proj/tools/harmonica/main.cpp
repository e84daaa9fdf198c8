#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "support.hpp"

namespace fs = std::filesystem;
using namespace cli;

namespace {

struct Common {
  ModelOptions model;
  BallOptions ball;
  std::string projection = "auto";
  std::size_t jobs = 0;
  bool lenient = false;
  std::string domain_policy = "auto";
  std::string config;  // consumed before parsing; declared for --help
};

struct InputVector {
  std::string x;
  bool from_stdin = false;
  std::string image;
  std::string image_size;
};

struct RegionOptions {
  std::string bounds;
  std::string grid;
  std::size_t mc = 0;
  std::uint64_t mc_seed = 0;
  std::string points;
};

void add_config(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "key=value file (model.*, ball.*, run.*); command-line flags win");
}

void add_model(CLI::App* app, Common& c) {
  auto* g = app;
  g->add_option("--builtin", c.model.builtin, "built-in function: f1 f2 f3 f4 linear constant step2d curve2d");
  g->add_option("--dim", c.model.dim, "input dimension (builtin), or the expected one for other sources");
  g->add_option("--params", c.model.params,
                "builtin parameters, e.g. level=1.5,amplitude=0.3,omega=2 or a=1:2:3,b=0.5");
  g->add_option("--mlp", c.model.mlp, "MLP weights JSON file");
  g->add_option("--subprocess", c.model.subprocess, "external model command (stdio line protocol)");
  g->add_option("--http", c.model.http, "external model base URL");
  g->add_option("--pool", c.model.pool, "connections per external model")->check(CLI::PositiveNumber);
  g->add_option("--timeout", c.model.timeout, "external model timeout per batch, seconds")
      ->check(CLI::PositiveNumber);
  g->add_flag("--no-probe", c.model.no_probe, "skip the determinism probe at handshake");
  g->add_flag("--pixel-domain", c.model.pixel_domain, "declare integer pixel inputs in [0,255]");
  g->add_option("--projection", c.projection, "auto, scalar, norm, class-logit or component:K");
}

void add_ball(CLI::App* app, Common& c) {
  app->add_option("--scheme", c.ball.scheme,
                  "ball: simplex simplex-anti random hypercube hypercube-sampled circle");
  app->add_option("--r,--radius", c.ball.radius, "ball radius");
  app->add_option("--fraction", c.ball.fraction, "sample fraction for hypercube-sampled");
  app->add_option("--seed", c.ball.seed, "seed for random and sampled balls");
  app->add_option("--circle-points", c.ball.circle_points, "points on the circle ball (2-D)");
  app->add_flag("--onehot-limit", c.ball.onehot_limit, "use the one-hot set for simplex balls when n >= 4096");
}

void add_run(CLI::App* app, Common& c) {
  app->add_option("--jobs", c.jobs, "worker threads (default HARMONICA_JOBS, else logical CPUs)");
  app->add_flag("--lenient", c.lenient, "skip failing points or samples instead of aborting");
  app->add_option("--domain-policy", c.domain_policy, "out-of-domain ball points: auto, clamp or skip");
}

void add_input(CLI::App* app, InputVector& in) {
  app->add_option("--x", in.x, "point, comma-separated");
  app->add_flag("--stdin", in.from_stdin, "read the point from stdin");
  app->add_option("--image", in.image, "PGM image as the point");
  app->add_option("--image-size", in.image_size, "W,H rescale for images");
}

void add_region(CLI::App* app, RegionOptions& r, bool grid_only) {
  app->add_option("--bounds", r.bounds, "box lo:hi per dimension, e.g. 0:5,0:3");
  app->add_option("--grid", r.grid, "grid nodes per dimension, e.g. 200,120 (one value = all dimensions)");
  if (grid_only) return;
  app->add_option("--mc", r.mc, "Monte Carlo point count");
  app->add_option("--mc-seed", r.mc_seed, "Monte Carlo seed");
  app->add_option("--points", r.points, "CSV of explicit points");
}

hm_run_options run_options(const Common& c) {
  hm_run_options o;
  hm_run_options_init(&o);
  o.jobs = c.jobs ? c.jobs : default_jobs();
  o.lenient = c.lenient ? 1 : 0;
  o.domain_policy = parse_domain_policy(c.domain_policy);
  return o;
}

hm_search_options search_options(const Common& c, bool early_exit) {
  hm_search_options o;
  hm_search_options_init(&o);
  o.jobs = c.jobs ? c.jobs : default_jobs();
  o.lenient = c.lenient ? 1 : 0;
  o.early_exit_on_flip = early_exit ? 1 : 0;
  o.domain_policy = parse_domain_policy(c.domain_policy);
  return o;
}

std::vector<double> read_input(const InputVector& in, Common& c) {
  const int sources = !in.x.empty() + in.from_stdin + !in.image.empty();
  if (sources != 1) usage_error("give exactly one of --x, --stdin or --image");
  if (!in.x.empty()) return parse_vector(in.x, "--x");
  if (in.from_stdin) {
    std::string line;
    if (!std::getline(std::cin, line)) usage_error("--stdin: no input");
    return parse_vector(line, "stdin");
  }
  if (in.image_size.empty()) usage_error("--image needs --image-size W,H");
  const auto [w, h] = parse_size(in.image_size, "--image-size");
  std::vector<double> px(w * h);
  check(hm_load_grayscale_image(in.image.c_str(), w, h, px.data(), px.size()), in.image);
  c.model.pixel_domain = true;
  return px;
}

Region make_region(const RegionOptions& r, bool grid_only) {
  hm_region* region = nullptr;
  if (!r.points.empty()) {
    if (!r.bounds.empty() || !r.grid.empty() || r.mc) usage_error("--points excludes --bounds, --grid and --mc");
    const Dataset d = read_csv_dataset(r.points, std::nullopt);
    check(hm_region_points(d.xs.data(), d.count, d.dim, &region), "region");
    return Region(region);
  }
  if (r.bounds.empty()) usage_error("a region needs --bounds (or --points)");
  std::vector<double> lo, hi;
  parse_bounds(r.bounds, lo, hi);
  if (!r.grid.empty() && r.mc) usage_error("--grid and --mc are exclusive");
  if (r.mc) {
    check(hm_region_monte_carlo(lo.size(), lo.data(), hi.data(), r.mc, r.mc_seed, &region), "region");
    return Region(region);
  }
  if (r.grid.empty()) usage_error(grid_only ? "--grid is required" : "a region needs --grid, --mc or --points");
  auto counts = parse_counts(r.grid, "--grid");
  if (counts.size() == 1) counts.assign(lo.size(), counts[0]);
  if (counts.size() != lo.size()) usage_error("--grid must give one count per dimension");
  check(hm_region_grid(lo.size(), lo.data(), hi.data(), counts.data(), &region), "region");
  return Region(region);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  if (dir.empty() || dir == ".") return;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) usage_error("cannot create output directory " + dir);
}

// ---- commands ---------------------------------------------------------------

int cmd_gamma_point(Common& c, InputVector& in) {
  const auto x = read_input(in, c);
  Model model = open_model(c.model, x.size());
  const hm_ball_spec spec = make_ball(c.ball);
  const hm_projection proj = make_projection(c.projection, model.get());
  const hm_run_options opts = run_options(c);
  hm_gamma_result r;
  check(hm_gamma_point(model.get(), x.data(), x.size(), &spec, &proj, &opts, &r));
  std::cout << "{\"gamma\":" << fmt(r.gamma) << ",\"stderr\":" << fmt(r.std_error) << ",\"ball_count\":" << r.ball_count
            << "}\n";
  return kOk;
}

int cmd_gamma_region(Common& c, RegionOptions& ro, const std::string& out, bool per_point) {
  Region region = make_region(ro, false);
  Model model = open_model(c.model, hm_region_dim(region.get()));
  const hm_ball_spec spec = make_ball(c.ball);
  const hm_projection proj = make_projection(c.projection, model.get());
  const hm_run_options opts = run_options(c);
  ensure_dir(out);
  Outputs outputs;
  hm_region_result* raw = nullptr;
  check(hm_gamma_region(model.get(), region.get(), &spec, &proj, &opts, &raw));
  RegionResult result(raw);
  double mean = 0, se = 0;
  std::size_t count = 0, skipped = 0;
  hm_region_result_summary(result.get(), &mean, &se, &count, &skipped);
  {
    const std::string path = outputs.add(join_path(out, "region_summary.csv"));
    std::ofstream f(path, std::ios::binary);
    f << "mean_gamma,stderr,count,skipped\n" << fmt(mean) << ',' << fmt(se) << ',' << count << ',' << skipped << '\n';
    if (!f) usage_error("cannot write " + path);
  }
  if (per_point)
    check(hm_region_result_write_csv(result.get(), outputs.add(join_path(out, "region_points.csv")).c_str()));
  outputs.keep();
  std::cout << "mean_gamma=" << fmt(mean) << " stderr=" << fmt(se) << " count=" << count << " skipped=" << skipped
            << '\n';
  return kOk;
}

int cmd_gamma_field(Common& c, RegionOptions& ro, const std::string& out) {
  Region region = make_region(ro, true);
  Model model = open_model(c.model, hm_region_dim(region.get()));
  const hm_ball_spec spec = make_ball(c.ball);
  const hm_projection proj = make_projection(c.projection, model.get());
  const hm_run_options opts = run_options(c);
  ensure_dir(out);
  Outputs outputs;
  hm_field* raw = nullptr;
  check(hm_gamma_field(model.get(), region.get(), &spec, &proj, &opts, &raw));
  Field field(raw);
  check(hm_field_write_csv(field.get(), outputs.add(join_path(out, "field.csv")).c_str()));
  outputs.keep();
  double top = 0.0;
  std::size_t nonzero = 0;
  for (std::size_t i = 0; i < hm_field_size(field.get()); ++i) {
    const double v = hm_field_value(field.get(), i);
    if (std::isnan(v)) continue;
    top = std::max(top, v);
    nonzero += v > 0.0;
  }
  std::cout << "nodes=" << hm_field_size(field.get()) << " nonzero=" << nonzero << " max_gamma=" << fmt(top)
            << " skipped=" << hm_field_skipped(field.get()) << '\n';
  return kOk;
}

int cmd_gamma_sweep(Common& c, RegionOptions& ro, const std::string& radii_text, const std::string& out) {
  if (radii_text.empty()) usage_error("--radii is required");
  const auto radii = parse_radii(radii_text);
  Region region = make_region(ro, false);
  Model model = open_model(c.model, hm_region_dim(region.get()));
  const hm_ball_spec spec = make_ball(c.ball);
  const hm_projection proj = make_projection(c.projection, model.get());
  const hm_run_options opts = run_options(c);
  ensure_dir(out);
  Outputs outputs;
  std::vector<hm_sweep_row> rows(radii.size());
  check(hm_radius_sweep(model.get(), region.get(), radii.data(), radii.size(), &spec, &proj, &opts, rows.data()));
  check(hm_write_sweep_csv(rows.data(), rows.size(), outputs.add(join_path(out, "sweep.csv")).c_str()));
  outputs.keep();
  for (const auto& r : rows)
    std::cout << "radius=" << fmt(r.radius) << " mean_gamma=" << fmt(r.mean_gamma) << " stderr=" << fmt(r.std_error)
              << '\n';
  return kOk;
}

int cmd_adv_search(Common& c, InputVector& in, std::size_t steps, const std::string& out, const std::string& trace_name,
                   const std::string& final_pgm, bool early_exit) {
  const auto x = read_input(in, c);
  Model model = open_model(c.model, x.size());
  const hm_ball_spec spec = make_ball(c.ball);
  const hm_projection proj = make_projection(c.projection, model.get());
  const hm_search_options opts = search_options(c, early_exit);
  ensure_dir(out);
  Outputs outputs;
  hm_trace* raw = nullptr;
  check(hm_adversarial_search(model.get(), x.data(), x.size(), &spec, steps, &proj, &opts, &raw));
  Trace trace(raw);
  check(hm_trace_write_jsonl(trace.get(), outputs.add(join_path(out, trace_name)).c_str()));
  const std::size_t len = hm_trace_length(trace.get());
  std::vector<double> last(x);
  hm_trace_step info{};
  if (len > 0) check(hm_trace_step_info(trace.get(), len - 1, &info, last.data(), last.size()));
  std::size_t changed = 0;
  for (std::size_t i = 0; i < x.size(); ++i) changed += last[i] != x[i];
  if (!final_pgm.empty()) {
    if (in.image_size.empty()) usage_error("--final-pgm needs an image input");
    const auto [w, h] = parse_size(in.image_size, "--image-size");
    check(hm_write_pgm(outputs.add(final_pgm).c_str(), w, h, last.data()));
  }
  outputs.keep();
  const std::int64_t origin = hm_trace_origin_label(trace.get());
  std::cout << "stable=" << (hm_trace_stable(trace.get()) ? "true" : "false") << " origin_label=" << origin
            << " final_label=" << (len ? info.label : origin) << " steps=" << len << " changed_coords=" << changed
            << '\n';
  return kOk;
}

int cmd_adv_batch(Common& c, const std::string& data, const std::string& images, const std::string& image_size,
                  const std::string& label_col, std::size_t steps, const std::string& out, bool early_exit,
                  bool logit_columns, bool no_traces) {
  if (data.empty() == images.empty()) usage_error("give exactly one of --data or --images");
  Dataset d;
  if (!data.empty()) {
    std::optional<long> lc;
    if (!label_col.empty()) {
      if (label_col == "last") {
        lc = -1;
      } else {
        try {
          std::size_t pos = 0;
          lc = std::stol(label_col, &pos);
          if (pos != label_col.size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
          usage_error("--label-col must be an integer column index or 'last'");
        }
      }
    }
    d = read_csv_dataset(data, lc);
  } else {
    if (image_size.empty()) usage_error("--images needs --image-size W,H");
    const auto [w, h] = parse_size(image_size, "--image-size");
    d = read_image_dataset(images, w, h);
    c.model.pixel_domain = true;
  }
  Model model = open_model(c.model, d.dim);
  const hm_ball_spec spec = make_ball(c.ball);
  const hm_projection proj = make_projection(c.projection, model.get());
  const hm_search_options opts = search_options(c, early_exit);
  ensure_dir(out);
  Outputs outputs;
  hm_batch_result* raw = nullptr;
  check(hm_batch_stability(model.get(), d.xs.data(), d.count, d.dim, d.labels.empty() ? nullptr : d.labels.data(),
                           d.has_label.empty() ? nullptr : d.has_label.data(), &spec, steps, &proj, &opts, &raw));
  Batch batch(raw);
  check(hm_batch_write_stats_csv(batch.get(), outputs.add(join_path(out, "stats.csv")).c_str(), logit_columns));
  check(hm_batch_write_records_csv(batch.get(), outputs.add(join_path(out, "records.csv")).c_str()));
  if (!no_traces) {
    const std::string dir = join_path(out, "traces");
    ensure_dir(dir);
    for (std::size_t i = 0; i < hm_batch_record_count(batch.get()); ++i) {
      hm_sample_record rec;
      check(hm_batch_record(batch.get(), i, &rec));
      const std::string name = d.names.empty() ? "sample_" + std::to_string(rec.index) : d.names[rec.index];
      check(hm_trace_write_jsonl(hm_batch_trace(batch.get(), i), outputs.add(join_path(dir, name + ".jsonl")).c_str()));
    }
  }
  outputs.keep();
  for (std::size_t i = 0; i < hm_batch_stats_count(batch.get()); ++i) {
    hm_stability_stats s;
    check(hm_batch_stats(batch.get(), i, &s));
    std::cout << "class " << s.class_id << ": count=" << s.count;
    if (s.has_accuracy) std::cout << " accuracy_pct=" << fmt(s.accuracy_pct);
    std::cout << " stability_pct=" << fmt(s.stability_pct) << " mean_gamma=" << fmt(s.mean_gamma)
              << " mean_prob=" << fmt(s.mean_prob) << " predicted_stability=" << fmt(s.predicted_stability) << '\n';
  }
  if (const std::size_t skipped = hm_batch_skipped(batch.get())) std::cout << "skipped=" << skipped << '\n';
  return kOk;
}

std::vector<hm_stability_record> read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) usage_error("cannot read records " + path);
  std::string line;
  if (!std::getline(in, line)) usage_error("records file " + path + " is empty");
  std::map<std::string, std::size_t> col;
  {
    std::stringstream ss(line);
    std::string name;
    for (std::size_t i = 0; std::getline(ss, name, ','); ++i) {
      if (!name.empty() && name.back() == '\r') name.pop_back();
      col[name] = i;
    }
  }
  for (const char* need : {"prob", "gamma", "stable"})
    if (!col.count(need)) usage_error(path + ": header lacks column '" + need + "'");
  std::vector<hm_stability_record> records;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    auto value = [&](const char* name) {
      const std::size_t i = col[name];
      if (i >= cells.size()) usage_error(path + ":" + std::to_string(lineno) + ": missing column " + name);
      const auto v = parse_vector(cells[i], path + ":" + std::to_string(lineno) + " " + name);
      return v[0];
    };
    records.push_back({value("prob"), value("gamma"), value("stable") != 0.0 ? 1 : 0});
  }
  if (records.empty()) usage_error("records file " + path + " has no records");
  return records;
}

int cmd_map(const std::string& records_path, std::string out, std::size_t prob_bins, std::size_t gamma_bins,
            const std::string& prob_edges, const std::string& gamma_edges, const std::string& lookup, bool nearest) {
  if (records_path.empty()) usage_error("--records is required");
  const auto records = read_records(records_path);
  hm_gamma_map* raw = nullptr;
  if (prob_edges.empty() != gamma_edges.empty()) usage_error("--prob-edges and --gamma-edges go together");
  if (!prob_edges.empty()) {
    const auto pe = parse_vector(prob_edges, "--prob-edges");
    const auto ge = parse_vector(gamma_edges, "--gamma-edges");
    check(hm_gamma_map_build(records.data(), records.size(), pe.data(), pe.size(), ge.data(), ge.size(), &raw));
  } else {
    check(hm_gamma_map_build_default(records.data(), records.size(), prob_bins, gamma_bins, &raw));
  }
  GammaMap map(raw);
  Outputs outputs;
  if (lookup.empty() && out.empty()) out = "gamma_map.csv";
  if (!out.empty()) check(hm_gamma_map_write_csv(map.get(), outputs.add(out).c_str()));
  if (!lookup.empty()) {
    const auto q = parse_vector(lookup, "--lookup");
    if (q.size() != 2) usage_error("--lookup must be prob,gamma");
    double fraction = 0.0;
    int found = 0;
    check(hm_gamma_map_lookup(map.get(), q[0], q[1], nearest ? 1 : 0, &fraction, &found));
    std::cout << (found ? fmt(fraction) : "n/a") << '\n';
  } else {
    std::cout << "records=" << hm_gamma_map_total(map.get()) << " cells=" << hm_gamma_map_prob_bins(map.get()) << "x"
              << hm_gamma_map_gamma_bins(map.get()) << '\n';
  }
  outputs.keep();
  return kOk;
}

struct CoverageCell {
  double centrality = 0.0;
  double isotropy = 0.0;
};

CoverageCell coverage_of(std::size_t n, const hm_ball_spec& spec) {
  std::vector<double> center(n, 0.0);
  std::size_t k = 0;
  check(hm_ball_size(n, &spec, &k));
  std::vector<double> pts(k * n);
  check(hm_ball_points(center.data(), n, &spec, pts.data(), pts.size()));
  CoverageCell cell;
  check(hm_coverage_metrics(pts.data(), k, center.data(), n, &cell.centrality, &cell.isotropy));
  return cell;
}

int cmd_bench_coverage(Common& c, const std::string& dims_text, std::size_t seeds, std::uint64_t base_seed,
                       const std::string& out) {
  std::vector<std::size_t> dims;
  if (dims_text.empty())
    for (std::size_t n = 2; n <= 1024; n *= 2) dims.push_back(n);
  else
    dims = parse_counts(dims_text, "--dims");
  if (seeds == 0) usage_error("--seeds must be positive");
  // Every (n, seed) cell lands in its own slot, so output does not depend on --jobs.
  std::vector<CoverageCell> random(dims.size() * seeds);
  std::vector<CoverageCell> simplex(dims.size());
  std::vector<std::string> errors(dims.size() * (seeds + 1));
  std::vector<int> codes(errors.size(), 0);
  const std::size_t tasks = dims.size() * (seeds + 1);
  const std::size_t jobs = std::min(c.jobs ? c.jobs : default_jobs(), tasks);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t; (t = next.fetch_add(1)) < tasks;) {
      const std::size_t di = t / (seeds + 1), s = t % (seeds + 1);
      try {
        hm_ball_spec spec;
        hm_ball_spec_init(&spec);
        if (s == seeds) {
          spec.scheme = HM_SCHEME_SIMPLEX;
          simplex[di] = coverage_of(dims[di], spec);
        } else {
          spec.scheme = HM_SCHEME_RANDOM;
          spec.seed = hm_sample_seed(base_seed, s);
          random[di * seeds + s] = coverage_of(dims[di], spec);
        }
      } catch (const Failure& f) {
        errors[t] = f.what();
        codes[t] = f.exit_code;
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
  }
  for (std::size_t t = 0; t < tasks; ++t)
    if (codes[t]) throw Failure(codes[t], errors[t]);

  auto mean_se = [](const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() < 2) return std::pair{m, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::pair{m, std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()))};
  };
  Outputs outputs;
  const std::string path = outputs.add(out);
  std::ofstream f(path, std::ios::binary);
  if (!f) usage_error("cannot write " + path);
  f << "n,scheme,seeds,centrality_mean,centrality_stderr,isotropy_mean,isotropy_stderr\n";
  std::vector<double> lx, ly;
  for (std::size_t di = 0; di < dims.size(); ++di) {
    std::vector<double> cen, iso;
    for (std::size_t s = 0; s < seeds; ++s) {
      cen.push_back(random[di * seeds + s].centrality);
      iso.push_back(random[di * seeds + s].isotropy);
    }
    const auto [cm, cs] = mean_se(cen);
    const auto [im, is] = mean_se(iso);
    f << dims[di] << ",random," << seeds << ',' << fmt(cm) << ',' << fmt(cs) << ',' << fmt(im) << ',' << fmt(is) << '\n';
    f << dims[di] << ",simplex,1," << fmt(simplex[di].centrality) << ",0," << fmt(simplex[di].isotropy) << ",0\n";
    lx.push_back(std::log(static_cast<double>(dims[di])));
    ly.push_back(std::log(cm));
  }
  f.close();
  if (!f) usage_error("cannot write " + path);
  outputs.keep();
  if (dims.size() >= 2) {
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(lx.size());
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(ly.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sxy += (lx[i] - mx) * (ly[i] - my);
      sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    std::cout << "random_centrality_loglog_slope=" << fmt(sxy / sxx) << '\n';
  }
  double worst = 0.0;
  for (const auto& s : simplex) worst = std::max(worst, s.centrality);
  std::cout << "simplex_max_centrality=" << fmt(worst) << '\n';
  return kOk;
}

// Config entries become flags placed right after the subcommand path, so
// flags given on the command line (which come later) take precedence.
std::vector<std::string> expand_config(std::vector<std::string> args, CLI::App& app) {
  std::string config;
  for (std::size_t i = 0; i < args.size();) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) usage_error("--config needs a file");
      config = args[i + 1];
      args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i) + 2);
    } else if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
      args.erase(args.begin() + static_cast<long>(i));
    } else {
      ++i;
    }
  }
  if (config.empty()) return args;
  CLI::App* sub = &app;
  std::size_t depth = 0;
  while (depth < args.size() && !args[depth].empty() && args[depth][0] != '-') {
    CLI::App* next = nullptr;
    try {
      next = sub->get_subcommand(args[depth]);
    } catch (const CLI::OptionNotFound&) {
      break;
    }
    sub = next;
    ++depth;
  }
  std::vector<std::string> injected;
  for (const auto& [key, value] : read_config(config)) {
    const auto flag = config_flag(key);
    if (!sub->get_option_no_throw(flag->flag)) continue;  // known key, not used by this command
    if (flag->boolean) {
      if (value != "true" && value != "false") usage_error(config + ": " + key + " must be true or false");
      injected.push_back(flag->flag + "=" + value);
    } else {
      injected.push_back(flag->flag);
      injected.push_back(value);
    }
  }
  args.insert(args.begin() + static_cast<long>(depth), injected.begin(), injected.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"harmonica: anharmonicity of black-box functions and gamma-guided adversarial search"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_version_flag("--version", "harmonica 0.1.0");

  Common common;
  InputVector input;
  RegionOptions region;
  std::string out = ".";
  bool per_point = false;
  std::string radii;
  std::size_t steps = 25;
  std::string trace_name = "trace.jsonl";
  std::string final_pgm;
  bool early_exit = false;
  std::string data, images, image_size, label_col;
  bool logit_columns = false, no_traces = false;
  std::string records, map_out, prob_edges, gamma_edges, lookup;
  std::size_t prob_bins = 10, gamma_bins = 10;
  bool nearest = false;
  std::string dims;
  std::size_t seeds = 50;
  std::uint64_t bench_seed = 0;
  std::string bench_out = "coverage.csv";
  std::size_t simplex_n = 0;
  std::string simplex_out = "-";

  auto* gamma = app.add_subcommand("gamma", "anharmonicity at points, over regions, fields and radius sweeps");
  gamma->require_subcommand(1);
  auto* g_point = gamma->add_subcommand("point", "gamma at one point; prints {\"gamma\",\"stderr\",\"ball_count\"}");
  auto* g_region = gamma->add_subcommand("region", "mean gamma over a region");
  auto* g_field = gamma->add_subcommand("field", "gamma at every node of a grid (field.csv)");
  auto* g_sweep = gamma->add_subcommand("sweep", "region mean gamma for several radii (sweep.csv)");
  for (auto* s : {g_point, g_region, g_field, g_sweep}) {
    add_config(s, common);
    add_model(s, common);
    add_ball(s, common);
    add_run(s, common);
  }
  add_input(g_point, input);
  add_region(g_region, region, false);
  add_region(g_field, region, true);
  add_region(g_sweep, region, false);
  for (auto* s : {g_region, g_field, g_sweep}) s->add_option("--out", out, "output directory");
  g_region->add_flag("--per-point", per_point, "also write region_points.csv");
  g_sweep->add_option("--radii", radii, "radii list a,b,c or range lo:hi:count");

  auto* adv = app.add_subcommand("adv", "gamma-guided adversarial search");
  adv->require_subcommand(1);
  auto* a_search = adv->add_subcommand("search", "adversarial search from one point (trace JSONL)");
  auto* a_batch = adv->add_subcommand("batch", "stability statistics over a dataset (stats.csv, records.csv)");
  for (auto* s : {a_search, a_batch}) {
    add_config(s, common);
    add_model(s, common);
    add_ball(s, common);
    add_run(s, common);
    s->add_option("--steps", steps, "adversarial steps N");
    s->add_option("--out", out, "output directory");
    s->add_flag("--early-exit", early_exit, "stop at the first label flip");
  }
  add_input(a_search, input);
  a_search->add_option("--trace", trace_name, "trace file name inside --out");
  a_search->add_option("--final-pgm", final_pgm, "write the final point as a PGM (image inputs)");
  a_batch->add_option("--data", data, "CSV dataset, one vector per row");
  a_batch->add_option("--label-col", label_col, "label column index (negative from the end) or 'last'");
  a_batch->add_option("--images", images, "directory of PGM images");
  a_batch->add_option("--image-size", image_size, "W,H rescale for images");
  a_batch->add_flag("--logit-columns", logit_columns, "append mean_class_logit,mean_other_logit to stats.csv");
  a_batch->add_flag("--no-traces", no_traces, "skip per-sample trace files");

  auto* map = app.add_subcommand("map", "Gamma Map from per-sample records");
  add_config(map, common);
  map->add_option("--records", records, "records.csv from adv batch");
  map->add_option("--out", map_out, "map CSV (default gamma_map.csv unless --lookup)");
  map->add_option("--prob-bins", prob_bins, "probability bins");
  map->add_option("--gamma-bins", gamma_bins, "gamma bins");
  map->add_option("--prob-edges", prob_edges, "explicit probability edges");
  map->add_option("--gamma-edges", gamma_edges, "explicit gamma edges");
  map->add_option("--lookup", lookup, "print the stability fraction at prob,gamma ('n/a' for an empty cell)");
  map->add_flag("--nearest", nearest, "lookup falls back to the nearest non-empty cell");

  auto* bench = app.add_subcommand("bench", "benchmarks");
  bench->require_subcommand(1);
  auto* coverage = bench->add_subcommand("coverage", "centrality and isotropy of random vs simplex balls");
  add_config(coverage, common);
  coverage->add_option("--dims", dims, "dimensions (default 2,4,...,1024)");
  coverage->add_option("--seeds", seeds, "random balls per dimension");
  coverage->add_option("--seed", bench_seed, "base seed");
  coverage->add_option("--out", bench_out, "output CSV");
  coverage->add_option("--jobs", common.jobs, "worker threads (default HARMONICA_JOBS, else logical CPUs)");

  auto* simplex = app.add_subcommand("simplex", "simplex vertices as CSV, one vertex per row");
  add_config(simplex, common);
  simplex->add_option("--n", simplex_n, "dimension")->required();
  simplex->add_option("--out", simplex_out, "output CSV ('-' for stdout)");

  try {
    std::vector<std::string> args = expand_config(std::vector<std::string>(argv + 1, argv + argc), app);
    std::reverse(args.begin(), args.end());
    try {
      app.parse(args);
    } catch (const CLI::ParseError& e) {
      if (e.get_exit_code() == 0) return app.exit(e);
      app.exit(e);
      return kUsage;
    }
    if (g_point->parsed()) return cmd_gamma_point(common, input);
    if (g_region->parsed()) return cmd_gamma_region(common, region, out, per_point);
    if (g_field->parsed()) return cmd_gamma_field(common, region, out);
    if (g_sweep->parsed()) return cmd_gamma_sweep(common, region, radii, out);
    if (a_search->parsed())
      return cmd_adv_search(common, input, steps, out, trace_name, final_pgm, early_exit);
    if (a_batch->parsed())
      return cmd_adv_batch(common, data, images, image_size, label_col, steps, out, early_exit, logit_columns,
                           no_traces);
    if (map->parsed())
      return cmd_map(records, map_out, prob_bins, gamma_bins, prob_edges, gamma_edges, lookup, nearest);
    if (coverage->parsed()) return cmd_bench_coverage(common, dims, seeds, bench_seed, bench_out);
    if (simplex->parsed()) {
      Outputs outputs;
      check(hm_write_simplex_csv(simplex_n, simplex_out == "-" ? "-" : outputs.add(simplex_out).c_str()));
      outputs.keep();
      return kOk;
    }
    return kUsage;
  } catch (const Failure& f) {
    std::cerr << "harmonica: " << f.what() << '\n';
    return f.exit_code;
  }
}
