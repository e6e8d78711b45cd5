// Copyright 2026 The dp-tails Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#ifndef DPTAILS_MODELS_HPP_
#define DPTAILS_MODELS_HPP_

#include <optional>
#include <span>
#include <string>

#include <Eigen/Core>

namespace dptails {

enum class ModelFamily { kLogisticBinary, kLogisticMultinomial, kMlp };

std::string ModelFamilyName(ModelFamily family);
ModelFamily ParseModelFamily(const std::string& name);

// Flat parameter vector plus the metadata needed to interpret it.
//
// Layouts (row-major, layer order, weights before biases):
//   LR-binary:       w[d], b
//   LR-multinomial:  W[K x d], b[K]
//   MLP-1:           W1[h x d], b1[h], W2[K x h], b2[K]
struct ModelParams {
  ModelFamily family = ModelFamily::kLogisticBinary;
  int input_dim = 0;
  int num_classes = 2;
  int hidden = 0;  // MLP only
  double l2_lambda = 0.0;
  Eigen::VectorXd theta;

  static Eigen::Index ParamCount(ModelFamily family, int input_dim, int num_classes, int hidden);
  static ModelParams Zeros(ModelFamily family, int input_dim, int num_classes, int hidden,
                           double l2_lambda);

  Eigen::Index size() const { return theta.size(); }
  // 1 on regularized (weight) coordinates, 0 on biases.
  Eigen::VectorXd WeightMask() const;
  void Validate() const;
};

using PerExampleGradients = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// n x K class probabilities; binary LR returns [1 - p, p].
Eigen::MatrixXd Predict(const ModelParams& params, const Eigen::MatrixXd& features);
// Probability of class 1 (binary tasks).
Eigen::VectorXd PositiveScores(const ModelParams& params, const Eigen::MatrixXd& features);
std::vector<int> PredictLabels(const ModelParams& params, const Eigen::MatrixXd& features,
                               double threshold = 0.5);

struct LossAndGradients {
  double mean_loss = 0.0;
  // Row i is the gradient of (cross-entropy_i + lambda/2 |weights|^2), so the
  // row mean is the full-batch gradient.
  PerExampleGradients per_example;
};

LossAndGradients LossAndPerExampleGrads(const ModelParams& params, const Eigen::MatrixXd& features,
                                        std::span<const int> labels);
// Mean cross-entropy plus lambda/2 |weights|^2.
double MeanLoss(const ModelParams& params, const Eigen::MatrixXd& features,
                std::span<const int> labels);
Eigen::VectorXd MeanGradient(const ModelParams& params, const Eigen::MatrixXd& features,
                             std::span<const int> labels);

// Unregularized single-record cross-entropy and its gradient.
double RecordLoss(const ModelParams& params, const Eigen::VectorXd& x, int label);
Eigen::VectorXd RecordLossGradient(const ModelParams& params, const Eigen::VectorXd& x, int label);

// Exact Hessian of MeanLoss for LR-binary, plus damping * I:
//   (1/n) sum s_i (1 - s_i) z_i z_i^T + lambda * diag(mask) + damping * I,
// with z_i = [x_i; 1] and the bias left unregularized.
Eigen::MatrixXd LrHessian(const ModelParams& params, const Eigen::MatrixXd& features,
                          double damping);

struct NewtonOptions {
  double gradient_tolerance = 1e-8;
  int max_iterations = 200;
};

struct NewtonResult {
  Eigen::VectorXd theta;
  double gradient_norm = 0.0;
  int iterations = 0;
};

// Minimizes (1/n) sum_i w_i CE_i(theta) + 1/2 theta^T diag(ridge) theta
//           + linear^T theta
// for binary logistic regression with theta = [w; b], using damped Newton
// steps with Armijo backtracking. `weights` defaults to all ones.
// Throws kOptimization if the gradient tolerance is not reached.
NewtonResult FitLogisticNewton(const Eigen::MatrixXd& features, std::span<const int> labels,
                               const Eigen::VectorXd& ridge, const Eigen::VectorXd& linear,
                               const NewtonOptions& options = {},
                               const std::optional<Eigen::VectorXd>& weights = std::nullopt,
                               const std::optional<Eigen::VectorXd>& init = std::nullopt);

// Non-private ridge-regularized binary LR fit (bias unregularized).
ModelParams FitRidgeLogistic(const Eigen::MatrixXd& features, std::span<const int> labels,
                             double l2_lambda, const NewtonOptions& options = {});

}  // namespace dptails

#endif  // DPTAILS_MODELS_HPP_
