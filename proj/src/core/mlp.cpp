#include "mlp.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "error.hpp"

namespace harmonica {
namespace {

using json = nlohmann::json;

class MlpModel final : public Model {
 public:
  explicit MlpModel(MlpWeights weights) : weights_(std::move(weights)) {}

  std::size_t input_dim() const override { return weights_.input_dim(); }
  std::size_t output_dim() const override { return weights_.output_dim(); }
  Backend backend() const override { return Backend::Mlp; }

 protected:
  Vector do_eval(std::span<const double> x) const override {
    Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    for (const MlpLayer& layer : weights_.layers) {
      Eigen::VectorXd z = layer.weights * a + layer.bias;
      switch (layer.activation) {
        case Activation::Identity: break;
        case Activation::ReLU: z = z.cwiseMax(0.0); break;
        case Activation::Tanh: z = z.array().tanh(); break;
        case Activation::Logistic: z = (1.0 + (-z.array()).exp()).inverse(); break;
      }
      a = std::move(z);
    }
    return Vector(a.data(), a.data() + a.size());
  }

 private:
  MlpWeights weights_;
};

std::string field(std::size_t layer, std::string_view name) {
  return "layers[" + std::to_string(layer) + "]." + std::string(name);
}

std::size_t read_dim(const json& layer, std::size_t index, const char* key) {
  if (!layer.contains(key)) fail(ErrorCode::Parse, field(index, key) + ": missing");
  const json& v = layer.at(key);
  if (!v.is_number_unsigned() || v.get<std::size_t>() == 0)
    fail(ErrorCode::Parse, field(index, key) + ": expected a positive integer");
  return v.get<std::size_t>();
}

std::vector<double> read_array(const json& layer, std::size_t index, const char* key,
                               std::size_t expected) {
  if (!layer.contains(key)) fail(ErrorCode::Parse, field(index, key) + ": missing");
  const json& v = layer.at(key);
  if (!v.is_array()) fail(ErrorCode::Parse, field(index, key) + ": expected an array");
  if (v.size() != expected)
    fail(ErrorCode::Parse, field(index, key) + ": expected " + std::to_string(expected) +
                               " entries, got " + std::to_string(v.size()));
  std::vector<double> out;
  out.reserve(expected);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number())
      fail(ErrorCode::Parse, field(index, key) + "[" + std::to_string(i) + "]: expected a number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

}  // namespace

std::string_view to_string(Activation a) noexcept {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::ReLU: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Logistic: return "logistic";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  for (auto a : {Activation::Identity, Activation::ReLU, Activation::Tanh, Activation::Logistic})
    if (to_string(a) == name) return a;
  fail(ErrorCode::Parse, "unknown activation '" + std::string(name) + "'");
}

void MlpWeights::validate() const {
  if (layers.empty()) fail(ErrorCode::InvalidArgument, "network has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const MlpLayer& l = layers[i];
    if (l.bias.size() != l.weights.rows())
      fail(ErrorCode::InvalidDimension, "layer " + std::to_string(i) + ": bias length " +
                                            std::to_string(l.bias.size()) + " != rows " +
                                            std::to_string(l.weights.rows()));
    if (i > 0 && layers[i - 1].weights.rows() != l.weights.cols())
      fail(ErrorCode::InvalidDimension,
           "layer " + std::to_string(i - 1) + " (" + std::to_string(layers[i - 1].weights.cols()) +
               " -> " + std::to_string(layers[i - 1].weights.rows()) + ") does not chain into layer " +
               std::to_string(i) + " (" + std::to_string(l.weights.cols()) + " -> " +
               std::to_string(l.weights.rows()) + ")");
  }
}

std::size_t MlpWeights::input_dim() const {
  return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().weights.cols());
}

std::size_t MlpWeights::output_dim() const {
  return layers.empty() ? 0 : static_cast<std::size_t>(layers.back().weights.rows());
}

MlpWeights parse_mlp_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::Parse, std::string("weights file: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("layers") || !doc["layers"].is_array())
    fail(ErrorCode::Parse, "weights file: expected an object with a \"layers\" array");
  MlpWeights w;
  const json& layers = doc["layers"];
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const json& l = layers[i];
    if (!l.is_object()) fail(ErrorCode::Parse, "layers[" + std::to_string(i) + "]: expected an object");
    const std::size_t rows = read_dim(l, i, "rows");
    const std::size_t cols = read_dim(l, i, "cols");
    std::vector<double> flat = read_array(l, i, "weights", rows * cols);
    std::vector<double> bias = read_array(l, i, "bias", rows);
    MlpLayer layer;
    layer.weights = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        flat.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    layer.bias = Eigen::Map<const Eigen::VectorXd>(bias.data(), static_cast<Eigen::Index>(rows));
    const std::string act = l.value("activation", std::string("identity"));
    try {
      layer.activation = parse_activation(act);
    } catch (const Error& e) {
      fail(ErrorCode::Parse, field(i, "activation") + ": " + e.what());
    }
    w.layers.push_back(std::move(layer));
  }
  w.validate();
  return w;
}

ModelHandle make_mlp(MlpWeights weights) {
  weights.validate();
  return std::make_shared<MlpModel>(std::move(weights));
}

ModelHandle load_mlp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open weights file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return make_mlp(parse_mlp_json(ss.str()));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace harmonica
