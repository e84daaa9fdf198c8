#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "model.hpp"

namespace harmonica {

enum class Activation { Identity, ReLU, Tanh, Logistic };

std::string_view to_string(Activation a) noexcept;
Activation parse_activation(std::string_view name);

struct MlpLayer {
  Eigen::MatrixXd weights;  // rows = outputs, cols = inputs
  Eigen::VectorXd bias;
  Activation activation = Activation::Identity;
};

struct MlpWeights {
  std::vector<MlpLayer> layers;

  /// Checks that adjacent layers chain; names both layers on mismatch.
  void validate() const;
  std::size_t input_dim() const;
  std::size_t output_dim() const;
};

/// Parses the weights document:
/// {"layers":[{"rows":R,"cols":C,"weights":[row-major R*C],"bias":[R],"activation":"relu"}, ...]}
MlpWeights parse_mlp_json(std::string_view text);

ModelHandle make_mlp(MlpWeights weights);
ModelHandle load_mlp(const std::filesystem::path& path);

}  // namespace harmonica
