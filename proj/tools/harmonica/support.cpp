#include "support.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace cli {

void usage_error(const std::string& msg) { throw Failure(kUsage, msg); }

int exit_code_for(hm_status status) {
  switch (status) {
    case HM_OK: return kOk;
    case HM_ERR_BACKEND:
    case HM_ERR_TIMEOUT:
    case HM_ERR_NON_DETERMINISTIC:
    case HM_ERR_INTERNAL: return kBackend;
    case HM_ERR_NON_FINITE: return kNumerical;
    default: return kUsage;
  }
}

void check(hm_status status, const std::string& context) {
  if (status == HM_OK) return;
  std::string msg = hm_last_error();
  if (!context.empty()) msg = context + ": " + msg;
  throw Failure(exit_code_for(status), msg);
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) v = 0.0;
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::optional<double> to_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

template <class T>
std::optional<T> to_integer(std::string_view s) {
  s = trim(s);
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

std::vector<double> parse_vector(std::string_view text, std::string_view what) {
  std::vector<double> out;
  std::size_t offset = 0;
  const auto parts = split(text, ',');
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::string where = std::string(what) + ": element " + std::to_string(i + 1) + " (offset " +
                              std::to_string(offset) + ")";
    if (trim(parts[i]).empty()) usage_error(where + " is empty");
    const auto v = to_double(parts[i]);
    if (!v) usage_error(where + " is not a number: '" + std::string(parts[i]) + "'");
    if (!std::isfinite(*v)) usage_error(where + " is not finite");
    out.push_back(*v);
    offset += parts[i].size() + 1;
  }
  return out;
}

std::vector<std::size_t> parse_counts(std::string_view text, std::string_view what) {
  std::vector<std::size_t> out;
  const auto parts = split(text, ',');
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto v = to_integer<std::size_t>(parts[i]);
    if (!v || *v == 0)
      usage_error(std::string(what) + ": element " + std::to_string(i + 1) + " must be a positive integer");
    out.push_back(*v);
  }
  return out;
}

void parse_bounds(std::string_view text, std::vector<double>& lo, std::vector<double>& hi) {
  lo.clear();
  hi.clear();
  const auto parts = split(text, ',');
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto ends = split(parts[i], ':');
    const std::string where = "--bounds: dimension " + std::to_string(i + 1);
    if (ends.size() != 2) usage_error(where + " must be lo:hi");
    const auto a = to_double(ends[0]);
    const auto b = to_double(ends[1]);
    if (!a || !b) usage_error(where + " has a non-numeric end");
    if (!(*a < *b)) usage_error(where + " needs lo < hi");
    lo.push_back(*a);
    hi.push_back(*b);
  }
}

std::vector<double> parse_radii(std::string_view text) {
  if (text.find(':') != std::string_view::npos) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) usage_error("--radii: a range is lo:hi:count");
    const auto lo = to_double(parts[0]);
    const auto hi = to_double(parts[1]);
    const auto n = to_integer<std::size_t>(parts[2]);
    if (!lo || !hi || !n || *n < 2 || !(*lo < *hi)) usage_error("--radii: need lo < hi and count >= 2");
    std::vector<double> r(*n);
    for (std::size_t i = 0; i < *n; ++i) r[i] = *lo + (*hi - *lo) * static_cast<double>(i) / static_cast<double>(*n - 1);
    return r;
  }
  auto r = parse_vector(text, "--radii");
  for (double v : r)
    if (!(v > 0.0)) usage_error("--radii: every radius must be positive");
  return r;
}

std::pair<std::size_t, std::size_t> parse_size(std::string_view text, std::string_view what) {
  const auto c = parse_counts(text, what);
  if (c.size() != 2) usage_error(std::string(what) + " must be W,H");
  return {c[0], c[1]};
}

std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) usage_error("cannot read config " + path);
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string_view::npos) usage_error(path + ":" + std::to_string(lineno) + ": expected key=value");
    const std::string key(trim(t.substr(0, eq)));
    const std::string value(trim(t.substr(eq + 1)));
    if (!config_flag(key)) usage_error(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    entries.emplace_back(key, value);
  }
  return entries;
}

std::optional<ConfigFlag> config_flag(std::string_view key) {
  static const std::map<std::string, ConfigFlag, std::less<>> table = {
      {"model.builtin", {"--builtin"}},
      {"model.dim", {"--dim"}},
      {"model.params", {"--params"}},
      {"model.mlp", {"--mlp"}},
      {"model.subprocess", {"--subprocess"}},
      {"model.http", {"--http"}},
      {"model.pool", {"--pool"}},
      {"model.timeout", {"--timeout"}},
      {"model.no_probe", {"--no-probe", true}},
      {"model.pixel_domain", {"--pixel-domain", true}},
      {"model.projection", {"--projection"}},
      {"ball.scheme", {"--scheme"}},
      {"ball.radius", {"--r"}},
      {"ball.fraction", {"--fraction"}},
      {"ball.seed", {"--seed"}},
      {"ball.circle_points", {"--circle-points"}},
      {"ball.onehot_limit", {"--onehot-limit", true}},
      {"run.jobs", {"--jobs"}},
      {"run.lenient", {"--lenient", true}},
      {"run.domain_policy", {"--domain-policy"}},
      {"run.out", {"--out"}},
      {"run.steps", {"--steps"}},
      {"run.early_exit", {"--early-exit", true}},
      {"run.bounds", {"--bounds"}},
      {"run.grid", {"--grid"}},
      {"run.mc", {"--mc"}},
      {"run.mc_seed", {"--mc-seed"}},
      {"run.points", {"--points"}},
      {"run.radii", {"--radii"}},
      {"run.data", {"--data"}},
      {"run.images", {"--images"}},
      {"run.image_size", {"--image-size"}},
      {"run.label_col", {"--label-col"}},
  };
  const auto it = table.find(key);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

Dataset read_csv_dataset(const std::string& path, std::optional<long> label_col) {
  std::ifstream in(path);
  if (!in) usage_error("cannot read dataset " + path);
  Dataset d;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (first) {
      first = false;
      // A header row is any first row with a non-numeric cell.
      bool header = false;
      for (auto c : cells)
        if (!trim(c).empty() && !to_double(c)) header = true;
      if (header) continue;
    }
    std::optional<std::size_t> lc;
    if (label_col) {
      const long n = static_cast<long>(cells.size());
      const long idx = *label_col < 0 ? n + *label_col : *label_col;
      if (idx < 0 || idx >= n)
        usage_error(path + ":" + std::to_string(lineno) + ": label column " + std::to_string(*label_col) +
                    " out of range");
      lc = static_cast<std::size_t>(idx);
    }
    const std::size_t dim = cells.size() - (lc ? 1 : 0);
    if (d.count == 0) d.dim = dim;
    if (dim != d.dim || dim == 0)
      usage_error(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(d.dim) + " values, got " +
                  std::to_string(dim));
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string where = path + ":" + std::to_string(lineno) + ": column " + std::to_string(c + 1);
      if (lc && c == *lc) {
        if (trim(cells[c]).empty()) {
          d.labels.push_back(0);
          d.has_label.push_back(0);
        } else {
          const auto v = to_integer<std::int64_t>(cells[c]);
          if (!v) usage_error(where + ": label must be an integer");
          d.labels.push_back(*v);
          d.has_label.push_back(1);
        }
        continue;
      }
      const auto v = to_double(cells[c]);
      if (!v || !std::isfinite(*v)) usage_error(where + ": not a finite number");
      d.xs.push_back(*v);
    }
    ++d.count;
  }
  if (d.count == 0) usage_error("dataset " + path + " has no rows");
  return d;
}

Dataset read_image_dataset(const std::string& dir, std::size_t w, std::size_t h) {
  std::error_code ec;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir, ec))
    if (e.is_regular_file() && e.path().extension() == ".pgm") files.push_back(e.path());
  if (ec) usage_error("cannot read image directory " + dir);
  if (files.empty()) usage_error("no .pgm files in " + dir);
  std::sort(files.begin(), files.end());
  Dataset d;
  d.dim = w * h;
  d.count = files.size();
  d.xs.resize(d.dim * d.count);
  for (std::size_t i = 0; i < files.size(); ++i) {
    check(hm_load_grayscale_image(files[i].c_str(), w, h, d.xs.data() + i * d.dim, d.dim), files[i].string());
    d.names.push_back(files[i].stem().string());
  }
  return d;
}

Model open_model(const ModelOptions& o, std::size_t dim_hint) {
  const int sources = !o.builtin.empty() + !o.mlp.empty() + !o.subprocess.empty() + !o.http.empty();
  if (sources != 1)
    usage_error("exactly one model source is required (--builtin, --mlp, --subprocess or --http)");
  hm_model* m = nullptr;
  if (!o.builtin.empty()) {
    const std::size_t n = o.dim ? o.dim : dim_hint;
    if (n == 0) usage_error("--dim is required for --builtin " + o.builtin);
    check(hm_model_builtin(o.builtin.c_str(), n, o.params.empty() ? nullptr : o.params.c_str(), &m), "model");
  } else if (!o.mlp.empty()) {
    check(hm_model_load_mlp(o.mlp.c_str(), &m), "model");
  } else {
    hm_external_options ext;
    hm_external_options_init(&ext);
    ext.input_dim = o.dim;
    ext.pool_size = o.pool;
    ext.timeout_seconds = o.timeout;
    ext.probe_determinism = o.no_probe ? 0 : 1;
    if (!o.subprocess.empty())
      check(hm_model_subprocess(o.subprocess.c_str(), &ext, &m), "model");
    else
      check(hm_model_http(o.http.c_str(), &ext, &m), "model");
  }
  Model model(m);
  if (o.dim && hm_model_input_dim(m) != o.dim)
    usage_error("model input dimension is " + std::to_string(hm_model_input_dim(m)) + ", --dim says " +
                std::to_string(o.dim));
  if (o.pixel_domain) check(hm_model_set_pixel_domain(m), "model");
  return model;
}

hm_ball_spec make_ball(const BallOptions& o) {
  hm_ball_spec spec;
  hm_ball_spec_init(&spec);
  check(hm_parse_scheme(o.scheme.c_str(), &spec.scheme), "--scheme");
  spec.radius = o.radius;
  spec.sample_fraction = o.fraction;
  spec.seed = o.seed;
  spec.circle_points = o.circle_points;
  spec.onehot_limit = o.onehot_limit ? 1 : 0;
  std::size_t ignored = 0;
  // Validates the spec without depending on the model.
  check(hm_ball_size(spec.scheme == HM_SCHEME_CIRCLE ? 2 : 1, &spec, &ignored), "ball");
  return spec;
}

hm_projection make_projection(const std::string& text, const hm_model* model) {
  if (text.empty() || text == "auto") return hm_default_projection(hm_model_output_dim(model));
  hm_projection p;
  check(hm_parse_projection(text.c_str(), &p), "--projection");
  if (p.mode == HM_PROJECT_COMPONENT && p.component >= hm_model_output_dim(model))
    usage_error("--projection component " + std::to_string(p.component) + " out of range for output dimension " +
                std::to_string(hm_model_output_dim(model)));
  if (p.mode == HM_PROJECT_SCALAR && hm_model_output_dim(model) != 1)
    usage_error("--projection scalar needs a single-output model");
  return p;
}

hm_domain_policy parse_domain_policy(const std::string& text) {
  if (text == "auto") return HM_DOMAIN_AUTO;
  if (text == "clamp") return HM_DOMAIN_CLAMP;
  if (text == "skip") return HM_DOMAIN_SKIP;
  usage_error("--domain-policy must be auto, clamp or skip");
}

std::size_t default_jobs() {
  if (const char* env = std::getenv("HARMONICA_JOBS")) {
    const auto v = to_integer<std::size_t>(env);
    if (!v || *v == 0) usage_error("HARMONICA_JOBS must be a positive integer");
    return *v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string Outputs::add(std::string path) {
  paths_.push_back(path);
  return path;
}

void Outputs::discard() {
  for (const auto& p : paths_) {
    std::error_code ec;
    if (p != "-") fs::remove(p, ec);
  }
  paths_.clear();
}

std::string join_path(const std::string& dir, const std::string& name) {
  if (dir.empty() || dir == ".") return name;
  return (fs::path(dir) / name).string();
}

}  // namespace cli
