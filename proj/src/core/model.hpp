#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geometry.hpp"

namespace harmonica {

enum class Backend { Builtin, Mlp, Subprocess, Http };

std::string_view to_string(Backend backend) noexcept;

/// Per-coordinate input bounds. Quantized domains (pixels) round to the
/// nearest integer and then clamp on every model input.
struct Domain {
  Vector lower;
  Vector upper;
  bool quantized = false;

  static Domain pixels(std::size_t n);

  bool contains(std::span<const double> x) const;
  /// Round (quantized only) then clamp into the bounds.
  Vector clamp(std::span<const double> x) const;
};

/// Black-box map from R^n to R^m. Implementations supply do_eval; the public
/// eval path validates dimensions, applies quantization and rejects
/// non-finite outputs.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::size_t input_dim() const = 0;
  virtual std::size_t output_dim() const = 0;
  virtual Backend backend() const = 0;
  /// Maximum number of concurrent eval calls the backend accepts; 0 = unbounded.
  virtual std::size_t concurrency() const { return 0; }

  Vector eval(std::span<const double> x) const;
  std::vector<Vector> eval_batch(std::span<const Vector> xs) const;

  const std::optional<Domain>& domain() const { return domain_; }
  void set_domain(Domain domain);

 protected:
  virtual Vector do_eval(std::span<const double> x) const = 0;
  /// Default evaluates one at a time; external backends override with a
  /// single round-trip.
  virtual std::vector<Vector> do_eval_batch(std::span<const Vector> xs) const;

 private:
  Vector prepare(std::span<const double> x) const;
  void check_output(std::span<const double> y) const;

  std::optional<Domain> domain_;
};

using ModelHandle = std::shared_ptr<Model>;

// ---------------------------------------------------------------------------
// Built-in analytic functions and synthetic classifiers

enum class BuiltinKind { F1, F2, F3, F4, Linear, Constant, Step2d, Curve2d };

std::string_view to_string(BuiltinKind kind) noexcept;
BuiltinKind parse_builtin_kind(std::string_view name);

struct BuiltinParams {
  Vector a;                     // linear coefficients; empty = all ones
  double b = 0.0;               // linear offset
  double c = 0.0;               // constant value
  double boundary_level = 0.5;  // step2d / curve2d
  double amplitude = 0.0;       // curve2d
  double omega = 1.0;           // curve2d
};

/// Parses "key=value" pairs separated by ','. List values (a) use ':'.
/// Keys: a, b, c, level, amplitude, omega.
BuiltinParams parse_builtin_params(std::string_view text);

ModelHandle make_builtin(BuiltinKind kind, std::size_t n, BuiltinParams params = {});

/// Arc length of x1 = level + A sin(omega x0) for x0 in [lo, hi].
double curve2d_arc_length(double amplitude, double omega, double lo, double hi);

// ---------------------------------------------------------------------------
// Output projection

enum class ProjectionMode { Scalar, Component, PredictedClassLogit, Norm };

struct OutputProjection {
  ProjectionMode mode = ProjectionMode::Scalar;
  std::size_t component = 0;

  static OutputProjection scalar() { return {ProjectionMode::Scalar, 0}; }
  static OutputProjection index(std::size_t k) { return {ProjectionMode::Component, k}; }
  static OutputProjection class_logit() { return {ProjectionMode::PredictedClassLogit, 0}; }
  static OutputProjection norm() { return {ProjectionMode::Norm, 0}; }
};

/// "scalar", "norm", "class-logit" or "component:K".
OutputProjection parse_projection(std::string_view text);
/// Default for a model: scalar for m = 1, class-logit otherwise.
OutputProjection default_projection(std::size_t output_dim);

void validate_projection(const OutputProjection& projection, std::size_t output_dim);

/// Index of the largest component; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

/// PredictedClassLogit becomes Component(argmax(anchor)); other modes pass through.
OutputProjection resolve_projection(const OutputProjection& projection,
                                    std::span<const double> anchor);

double project(std::span<const double> output, const OutputProjection& projection,
               std::optional<std::span<const double>> anchor = std::nullopt);

/// Predicted class: argmax for m >= 2, (y > 0.5) for m = 1.
std::int64_t predicted_label(std::span<const double> output);

}  // namespace harmonica
