#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "xsect/random.hpp"

namespace xsect {

struct DnnConfig {
  std::vector<int> hidden_layers;
  std::vector<double> dropout_rates;
  int epochs = 20;
  int minibatch = 500;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double bn_momentum = 0.99;
  double bn_epsilon = 1e-5;
};

void validate(const DnnConfig& config);

// affine -> batch norm -> ReLU -> dropout
struct HiddenLayer {
  Eigen::MatrixXd weight;  // fan_in x units
  Eigen::RowVectorXd bias;
  Eigen::RowVectorXd gamma;
  Eigen::RowVectorXd beta;
  Eigen::RowVectorXd running_mean;
  Eigen::RowVectorXd running_var;
  double dropout = 0.0;
};

// Intermediate values of one training-mode forward pass.
struct ForwardTrace {
  std::vector<Eigen::MatrixXd> inputs;   // input of each hidden layer
  std::vector<Eigen::MatrixXd> normalized;
  std::vector<Eigen::MatrixXd> shifted;  // gamma * normalized + beta, before ReLU
  std::vector<Eigen::RowVectorXd> batch_mean;
  std::vector<Eigen::RowVectorXd> batch_var;
  Eigen::MatrixXd last_hidden;           // after dropout
  Eigen::VectorXd output;
};

class DnnModel {
 public:
  DnnModel() = default;
  // Weights ~ truncated normal(0, sqrt(2 / fan_in)); biases and BN shifts 0,
  // BN scales 1, running statistics (0, 1).
  DnnModel(int n_inputs, const DnnConfig& config, Rng& rng);

  int n_inputs() const { return n_inputs_; }
  double bn_epsilon() const { return bn_epsilon_; }
  const std::vector<HiddenLayer>& hidden() const { return hidden_; }
  const Eigen::VectorXd& output_weight() const { return out_weight_; }
  double output_bias() const { return out_bias_; }

  // Inference: no dropout, batch norm on running statistics.
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;

  // Dropout masks per hidden layer (batch x units), already scaled by
  // 1 / keep so training uses inverted dropout.
  std::vector<Eigen::MatrixXd> sample_masks(Eigen::Index batch, Rng& rng) const;
  std::vector<Eigen::MatrixXd> unit_masks(Eigen::Index batch) const;

  ForwardTrace forward_train(const Eigen::MatrixXd& X, const std::vector<Eigen::MatrixXd>& masks) const;
  // Mean squared error of a training-mode pass with fixed masks.
  double loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<Eigen::MatrixXd>& masks) const;
  // Same loss plus its gradient in parameters() layout.
  double loss_and_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const std::vector<Eigen::MatrixXd>& masks, Eigen::VectorXd& gradient,
                           ForwardTrace* trace = nullptr) const;

  // Flat layout: per hidden layer weight (column-major), bias, gamma, beta;
  // then output weight and bias. Running statistics are not parameters.
  Eigen::Index parameter_count() const;
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& flat);

  void update_running_stats(const ForwardTrace& trace, double momentum);

  // Direct construction, used when loading a saved model.
  DnnModel(int n_inputs, double bn_epsilon, std::vector<HiddenLayer> hidden, Eigen::VectorXd out_weight,
           double out_bias);

 private:
  int n_inputs_ = 0;
  double bn_epsilon_ = 1e-5;
  std::vector<HiddenLayer> hidden_;
  Eigen::VectorXd out_weight_;
  double out_bias_ = 0.0;
};

// Runs exactly config.epochs passes of shuffled mini-batch Adam on the MSE.
// Throws Error when the loss becomes non-finite.
DnnModel dnn_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const DnnConfig& config, std::uint64_t seed);

}  // namespace xsect
