#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "fedprint/device_model.hpp"

namespace fedprint {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Feature matrix (one sample per row) with aligned class indices.
struct Dataset {
  RowMatrix x;
  std::vector<int> y;

  std::size_t size() const { return y.size(); }
  bool empty() const { return y.empty(); }
};

// Fully connected ReLU network with a softmax output layer.
struct MlpArchitecture {
  std::vector<int> layer_sizes = {13, 100, 100, 4};

  void validate() const;
  std::size_t parameter_count() const;
  std::size_t input_size() const { return static_cast<std::size_t>(layer_sizes.front()); }
  std::size_t output_size() const { return static_cast<std::size_t>(layer_sizes.back()); }
  bool operator==(const MlpArchitecture&) const = default;
};

// Layer l maps layer_sizes[l] inputs to layer_sizes[l+1] outputs as
// z = a * weights + bias, so `weights` is (fan_in x fan_out).
struct DenseLayer {
  RowMatrix weights;
  Eigen::RowVectorXd bias;
};

// Canonical flat order: layer by layer, the weight matrix (row-major,
// i.e. input-major) followed by the bias vector.
struct ModelWeights {
  std::vector<DenseLayer> layers;

  MlpArchitecture architecture() const;
  bool operator==(const ModelWeights& other) const;
};

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  Vector first_moment;
  Vector second_moment;
  std::int64_t step = 0;

  static AdamState fresh(const MlpArchitecture& arch, const AdamConfig& config = {});
};

ModelWeights init_weights(const MlpArchitecture& arch, std::uint64_t seed);
ModelWeights zero_weights(const MlpArchitecture& arch);

Vector flatten(const ModelWeights& weights);
ModelWeights unflatten(const MlpArchitecture& arch, const Vector& flat);

// Class probabilities, one row per input row.
RowMatrix forward(const ModelWeights& weights, const RowMatrix& batch);

// Mean cross-entropy over the rows.
double cross_entropy(const ModelWeights& weights, const Dataset& data);

struct LossAndGradient {
  double loss = 0;
  Vector gradient;  // canonical flat order
};

// Mean cross-entropy over `rows` of `data` and its gradient.
LossAndGradient loss_and_gradient(const ModelWeights& weights, const RowMatrix& x,
                                  std::span<const int> y);

struct EpochResult {
  double mean_loss = 0;
  std::size_t batches = 0;
};

// One shuffled pass of mini-batch Adam over `data`. Mutates weights and adam.
EpochResult train_epoch(ModelWeights& weights, AdamState& adam, const Dataset& data,
                        std::size_t batch_size, std::uint64_t rng_seed);

using ConfusionMatrix = std::array<std::array<std::int64_t, kClassCount>, kClassCount>;

struct Evaluation {
  double accuracy = 0;
  ConfusionMatrix confusion{};  // [true][predicted]
  std::size_t total = 0;
};

// Predicted class per row; ties go to the lowest class index.
std::vector<int> predict(const ModelWeights& weights, const RowMatrix& batch);

Evaluation evaluate(const ModelWeights& weights, const Dataset& data);

}  // namespace fedprint
