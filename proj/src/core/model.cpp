#include "model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <string>

#include "error.hpp"
#include "quadrature.hpp"

namespace harmonica {

std::string_view to_string(Backend backend) noexcept {
  switch (backend) {
    case Backend::Builtin: return "builtin";
    case Backend::Mlp: return "mlp";
    case Backend::Subprocess: return "subprocess";
    case Backend::Http: return "http";
  }
  return "?";
}

Domain Domain::pixels(std::size_t n) {
  return Domain{Vector(n, 0.0), Vector(n, 255.0), true};
}

bool Domain::contains(std::span<const double> x) const {
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] < lower[i] || x[i] > upper[i]) return false;
  return true;
}

Vector Domain::clamp(std::span<const double> x) const {
  Vector out(x.begin(), x.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (quantized) out[i] = std::round(out[i]);
    out[i] = std::clamp(out[i], lower[i], upper[i]);
  }
  return out;
}

void Model::set_domain(Domain domain) {
  if (domain.lower.size() != input_dim() || domain.upper.size() != input_dim())
    fail(ErrorCode::InvalidDimension, "domain bounds must have one entry per input coordinate");
  for (std::size_t i = 0; i < input_dim(); ++i)
    if (!(domain.lower[i] <= domain.upper[i]))
      fail(ErrorCode::InvalidArgument, "domain lower bound exceeds upper bound at coordinate " +
                                           std::to_string(i));
  domain_ = std::move(domain);
}

Vector Model::prepare(std::span<const double> x) const {
  if (x.size() != input_dim())
    fail(ErrorCode::InvalidDimension, "model expects " + std::to_string(input_dim()) +
                                          " inputs, got " + std::to_string(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]))
      fail(ErrorCode::InvalidArgument, "non-finite input at coordinate " + std::to_string(i));
  if (domain_ && domain_->quantized) return domain_->clamp(x);
  return Vector(x.begin(), x.end());
}

void Model::check_output(std::span<const double> y) const {
  if (y.size() != output_dim())
    fail(ErrorCode::Backend, "model returned " + std::to_string(y.size()) + " outputs, expected " +
                                 std::to_string(output_dim()));
  for (std::size_t i = 0; i < y.size(); ++i)
    if (!std::isfinite(y[i]))
      fail(ErrorCode::NonFinite, "model output " + std::to_string(i) + " is not finite");
}

Vector Model::eval(std::span<const double> x) const {
  Vector y = do_eval(prepare(x));
  check_output(y);
  return y;
}

std::vector<Vector> Model::eval_batch(std::span<const Vector> xs) const {
  std::vector<Vector> prepared;
  prepared.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    try {
      prepared.push_back(prepare(xs[i]));
    } catch (const Error& e) {
      throw Error(e.code(), "input " + std::to_string(i) + ": " + e.what());
    }
  }
  std::vector<Vector> ys = do_eval_batch(prepared);
  if (ys.size() != xs.size())
    fail(ErrorCode::Backend, "model returned " + std::to_string(ys.size()) + " results for " +
                                 std::to_string(xs.size()) + " inputs");
  for (std::size_t i = 0; i < ys.size(); ++i) {
    try {
      check_output(ys[i]);
    } catch (const Error& e) {
      throw Error(e.code(), "input " + std::to_string(i) + ": " + e.what());
    }
  }
  return ys;
}

std::vector<Vector> Model::do_eval_batch(std::span<const Vector> xs) const {
  std::vector<Vector> ys;
  ys.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    try {
      ys.push_back(do_eval(xs[i]));
    } catch (const Error& e) {
      throw Error(e.code(), "input " + std::to_string(i) + ": " + e.what());
    }
  }
  return ys;
}

// ---------------------------------------------------------------------------

namespace {

class BuiltinModel final : public Model {
 public:
  BuiltinModel(BuiltinKind kind, std::size_t n, BuiltinParams params)
      : kind_(kind), n_(n), params_(std::move(params)) {}

  std::size_t input_dim() const override { return n_; }
  std::size_t output_dim() const override { return 1; }
  Backend backend() const override { return Backend::Builtin; }

 protected:
  Vector do_eval(std::span<const double> x) const override { return {value(x)}; }

 private:
  double value(std::span<const double> x) const {
    switch (kind_) {
      case BuiltinKind::F1: {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += (i % 2 == 0 ? 1.0 : -1.0) * x[i] * x[i];
        return s;
      }
      case BuiltinKind::F2: {
        double s = 0.0;
        for (double v : x) s += v * v;
        return s;
      }
      case BuiltinKind::F3: {
        double p = 1.0;
        for (std::size_t k = 0; 2 * k + 1 < x.size(); ++k)
          p *= std::sin(x[2 * k]) * std::exp(x[2 * k + 1]);
        return p;
      }
      case BuiltinKind::F4:
        return std::exp(std::accumulate(x.begin(), x.end(), 0.0));
      case BuiltinKind::Linear:
        return std::inner_product(x.begin(), x.end(), params_.a.begin(), params_.b);
      case BuiltinKind::Constant:
        return params_.c;
      case BuiltinKind::Step2d:
        return x[1] > params_.boundary_level ? 1.0 : 0.0;
      case BuiltinKind::Curve2d:
        return x[1] > params_.boundary_level + params_.amplitude * std::sin(params_.omega * x[0])
                   ? 1.0
                   : 0.0;
    }
    return 0.0;
  }

  BuiltinKind kind_;
  std::size_t n_;
  BuiltinParams params_;
};

double parse_number(std::string_view key, std::string_view text) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
    fail(ErrorCode::Parse, "builtin parameter '" + std::string(key) + "': cannot parse '" +
                               std::string(text) + "' as a number");
  return v;
}

}  // namespace

std::string_view to_string(BuiltinKind kind) noexcept {
  switch (kind) {
    case BuiltinKind::F1: return "f1";
    case BuiltinKind::F2: return "f2";
    case BuiltinKind::F3: return "f3";
    case BuiltinKind::F4: return "f4";
    case BuiltinKind::Linear: return "linear";
    case BuiltinKind::Constant: return "constant";
    case BuiltinKind::Step2d: return "step2d";
    case BuiltinKind::Curve2d: return "curve2d";
  }
  return "?";
}

BuiltinKind parse_builtin_kind(std::string_view name) {
  for (auto k : {BuiltinKind::F1, BuiltinKind::F2, BuiltinKind::F3, BuiltinKind::F4,
                 BuiltinKind::Linear, BuiltinKind::Constant, BuiltinKind::Step2d,
                 BuiltinKind::Curve2d})
    if (to_string(k) == name) return k;
  fail(ErrorCode::InvalidArgument, "unknown builtin model '" + std::string(name) + "'");
}

BuiltinParams parse_builtin_params(std::string_view text) {
  BuiltinParams p;
  while (!text.empty()) {
    const auto comma = text.find(',');
    std::string_view item = text.substr(0, comma);
    text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos)
      fail(ErrorCode::Parse, "builtin parameter '" + std::string(item) + "' lacks '='");
    const std::string_view key = item.substr(0, eq);
    const std::string_view value = item.substr(eq + 1);
    if (key == "a") {
      p.a.clear();
      std::string_view rest = value;
      while (true) {
        const auto colon = rest.find(':');
        p.a.push_back(parse_number(key, rest.substr(0, colon)));
        if (colon == std::string_view::npos) break;
        rest = rest.substr(colon + 1);
      }
    } else if (key == "b") {
      p.b = parse_number(key, value);
    } else if (key == "c") {
      p.c = parse_number(key, value);
    } else if (key == "level") {
      p.boundary_level = parse_number(key, value);
    } else if (key == "amplitude") {
      p.amplitude = parse_number(key, value);
    } else if (key == "omega") {
      p.omega = parse_number(key, value);
    } else {
      fail(ErrorCode::Parse, "unknown builtin parameter '" + std::string(key) + "'");
    }
  }
  return p;
}

ModelHandle make_builtin(BuiltinKind kind, std::size_t n, BuiltinParams params) {
  if (n == 0) fail(ErrorCode::InvalidDimension, "builtin model dimension must be at least 1");
  switch (kind) {
    case BuiltinKind::F1:
      if (n % 2 != 0) fail(ErrorCode::InvalidDimension, "f1 is harmonic only for even n; got n=" + std::to_string(n));
      break;
    case BuiltinKind::F3:
      if (n % 2 != 0) fail(ErrorCode::InvalidDimension, "f3 needs sin/exp coordinate pairs (even n); got n=" + std::to_string(n));
      break;
    case BuiltinKind::Step2d:
    case BuiltinKind::Curve2d:
      if (n != 2) fail(ErrorCode::InvalidDimension, std::string(to_string(kind)) + " is a 2-D model");
      break;
    case BuiltinKind::Linear:
      if (params.a.empty()) params.a.assign(n, 1.0);
      if (params.a.size() != n)
        fail(ErrorCode::InvalidDimension, "linear model needs " + std::to_string(n) +
                                              " coefficients, got " + std::to_string(params.a.size()));
      break;
    default:
      break;
  }
  return std::make_shared<BuiltinModel>(kind, n, std::move(params));
}

double curve2d_arc_length(double amplitude, double omega, double lo, double hi) {
  const double k = amplitude * omega;
  auto speed = [k, omega](double t) {
    const double c = std::cos(omega * t);
    return std::sqrt(1.0 + k * k * c * c);
  };
  return adaptive_simpson(speed, lo, hi, 1e-12);
}

// ---------------------------------------------------------------------------

OutputProjection parse_projection(std::string_view text) {
  if (text == "scalar") return OutputProjection::scalar();
  if (text == "norm") return OutputProjection::norm();
  if (text == "class-logit") return OutputProjection::class_logit();
  constexpr std::string_view prefix = "component:";
  if (text.starts_with(prefix)) {
    std::string_view digits = text.substr(prefix.size());
    std::size_t k = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    if (ec == std::errc{} && ptr == digits.data() + digits.size() && !digits.empty())
      return OutputProjection::index(k);
  }
  fail(ErrorCode::InvalidArgument, "unknown projection '" + std::string(text) +
                                       "' (expected scalar, norm, class-logit or component:K)");
}

OutputProjection default_projection(std::size_t output_dim) {
  return output_dim == 1 ? OutputProjection::scalar() : OutputProjection::class_logit();
}

void validate_projection(const OutputProjection& projection, std::size_t output_dim) {
  if (projection.mode == ProjectionMode::Scalar && output_dim != 1)
    fail(ErrorCode::InvalidArgument, "scalar projection needs a single-output model; model has " +
                                         std::to_string(output_dim) + " outputs");
  if (projection.mode == ProjectionMode::Component && projection.component >= output_dim)
    fail(ErrorCode::InvalidArgument, "projection component " + std::to_string(projection.component) +
                                         " out of range for " + std::to_string(output_dim) +
                                         " outputs");
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) fail(ErrorCode::InvalidArgument, "argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

OutputProjection resolve_projection(const OutputProjection& projection,
                                    std::span<const double> anchor) {
  if (projection.mode != ProjectionMode::PredictedClassLogit) return projection;
  return OutputProjection::index(argmax(anchor));
}

double project(std::span<const double> output, const OutputProjection& projection,
               std::optional<std::span<const double>> anchor) {
  switch (projection.mode) {
    case ProjectionMode::Scalar:
      if (output.size() != 1)
        fail(ErrorCode::InvalidArgument, "scalar projection of a " + std::to_string(output.size()) +
                                             "-component output");
      return output[0];
    case ProjectionMode::Component:
      if (projection.component >= output.size())
        fail(ErrorCode::InvalidArgument, "projection component out of range");
      return output[projection.component];
    case ProjectionMode::PredictedClassLogit: {
      if (!anchor) fail(ErrorCode::Precondition, "class-logit projection needs an anchor output");
      const std::size_t k = argmax(*anchor);
      if (k >= output.size()) fail(ErrorCode::InvalidArgument, "anchor longer than output");
      return output[k];
    }
    case ProjectionMode::Norm: {
      double s = 0.0;
      for (double v : output) s += v * v;
      return std::sqrt(s);
    }
  }
  return 0.0;
}

std::int64_t predicted_label(std::span<const double> output) {
  if (output.size() == 1) return output[0] > 0.5 ? 1 : 0;
  return static_cast<std::int64_t>(argmax(output));
}

}  // namespace harmonica
