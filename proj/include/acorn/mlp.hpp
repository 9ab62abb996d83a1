#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "acorn/matrix.hpp"

namespace acorn {

// input -> hidden (ReLU) -> class logits.
struct MlpParameters {
  Matrix w1;               // input_dim x hidden
  std::vector<double> b1;  // hidden
  Matrix w2;               // hidden x classes
  std::vector<double> b2;  // classes

  bool operator==(const MlpParameters&) const = default;
};

struct MlpModel {
  MlpParameters params;
  std::vector<std::string> labels;  // output index -> workload label

  std::size_t input_dim() const { return params.w1.rows(); }
  std::size_t hidden() const { return params.w1.cols(); }
  std::size_t classes() const { return params.w2.cols(); }

  // All-zero parameters; predicts the uniform distribution.
  static MlpModel zeros(std::size_t input_dim, std::size_t hidden, std::vector<std::string> labels);
  // Uniform +-sqrt(6 / (fan_in + fan_out)) weights, zero biases.
  static MlpModel glorot(std::size_t input_dim, std::size_t hidden, std::vector<std::string> labels,
                         std::uint64_t seed);

  bool operator==(const MlpModel&) const = default;
};

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 128;
  std::size_t epochs = 5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  bool shuffle = true;
  std::size_t hidden = 128;
};

struct TrainResult {
  MlpModel model;
  std::vector<double> epoch_loss;  // mean cross-entropy seen during each epoch
};

// Mini-batch Adam on mean softmax cross-entropy. The last partial batch is
// kept. Throws ShapeMismatch on bad labels/shapes, NonFiniteLoss if the loss
// diverges.
TrainResult train(const Matrix& features, std::span<const std::size_t> labels,
                  std::vector<std::string> class_labels, const TrainConfig& config);

struct Prediction {
  std::size_t label = 0;
  std::vector<double> probabilities;
};

Prediction predict(const MlpModel& model, std::span<const double> x);
std::vector<double> logits(const MlpModel& model, std::span<const double> x);

// Mean cross-entropy over the rows and its gradient with respect to every
// parameter, in the same shapes as MlpParameters.
struct LossGradient {
  double loss = 0.0;
  MlpParameters gradient;
};
LossGradient loss_and_gradient(const MlpModel& model, const Matrix& features,
                               std::span<const std::size_t> labels);

}  // namespace acorn
