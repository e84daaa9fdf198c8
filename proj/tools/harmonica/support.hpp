#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "harmonica/harmonica.h"

namespace cli {

enum Exit { kOk = 0, kUsage = 2, kBackend = 3, kNumerical = 4 };

struct Failure : std::runtime_error {
  Failure(int code, const std::string& msg) : std::runtime_error(msg), exit_code(code) {}
  int exit_code;
};

[[noreturn]] void usage_error(const std::string& msg);
int exit_code_for(hm_status status);
/// Throws Failure carrying hm_last_error() when status is not HM_OK.
void check(hm_status status, const std::string& context = {});

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Model = std::unique_ptr<hm_model, Deleter<hm_model, hm_model_free>>;
using Region = std::unique_ptr<hm_region, Deleter<hm_region, hm_region_free>>;
using RegionResult = std::unique_ptr<hm_region_result, Deleter<hm_region_result, hm_region_result_free>>;
using Field = std::unique_ptr<hm_field, Deleter<hm_field, hm_field_free>>;
using Trace = std::unique_ptr<hm_trace, Deleter<hm_trace, hm_trace_free>>;
using Batch = std::unique_ptr<hm_batch_result, Deleter<hm_batch_result, hm_batch_result_free>>;
using GammaMap = std::unique_ptr<hm_gamma_map, Deleter<hm_gamma_map, hm_gamma_map_free>>;

std::string fmt(double v);

/// Comma-separated reals. Errors name the 1-based element and its character offset.
std::vector<double> parse_vector(std::string_view text, std::string_view what);
std::vector<std::size_t> parse_counts(std::string_view text, std::string_view what);
/// "lo:hi,lo:hi,..."
void parse_bounds(std::string_view text, std::vector<double>& lo, std::vector<double>& hi);
/// A list "a,b,c" or a range "lo:hi:count" (count >= 2, endpoints included).
std::vector<double> parse_radii(std::string_view text);
/// "W,H"
std::pair<std::size_t, std::size_t> parse_size(std::string_view text, std::string_view what);

/// Flat key=value config. Blank lines and '#' comments are skipped.
std::vector<std::pair<std::string, std::string>> read_config(const std::string& path);

/// Command-line flag for a config key, or nullopt for an unknown key.
struct ConfigFlag {
  std::string flag;
  bool boolean = false;
};
std::optional<ConfigFlag> config_flag(std::string_view key);

struct Dataset {
  std::vector<double> xs;  // rows of dim
  std::size_t dim = 0;
  std::size_t count = 0;
  std::vector<std::int64_t> labels;
  std::vector<unsigned char> has_label;
  std::vector<std::string> names;  // image file stems, empty for CSV
};

/// One vector per row; an optional header row is skipped. label_col selects a
/// label column (negative counts from the end); empty label cells are unlabeled.
Dataset read_csv_dataset(const std::string& path, std::optional<long> label_col);
Dataset read_image_dataset(const std::string& dir, std::size_t w, std::size_t h);

struct ModelOptions {
  std::string builtin;
  std::string params;
  std::string mlp;
  std::string subprocess;
  std::string http;
  std::size_t dim = 0;
  std::size_t pool = 1;
  double timeout = 30.0;
  bool no_probe = false;
  bool pixel_domain = false;
};

/// dim_hint fills in the builtin dimension when --dim is absent.
Model open_model(const ModelOptions& options, std::size_t dim_hint);

struct BallOptions {
  std::string scheme = "simplex";
  double radius = 1.0;
  double fraction = 1.0;
  std::uint64_t seed = 0;
  std::size_t circle_points = 64;
  bool onehot_limit = false;
};

hm_ball_spec make_ball(const BallOptions& options);
hm_projection make_projection(const std::string& text, const hm_model* model);
hm_domain_policy parse_domain_policy(const std::string& text);

/// Jobs default: HARMONICA_JOBS, else logical CPUs.
std::size_t default_jobs();

/// Tracks files a command writes so they can be removed if it fails.
class Outputs {
 public:
  std::string add(std::string path);
  void discard();
  void keep() { paths_.clear(); }
  ~Outputs() { discard(); }

 private:
  std::vector<std::string> paths_;
};

std::string join_path(const std::string& dir, const std::string& name);

}  // namespace cli
