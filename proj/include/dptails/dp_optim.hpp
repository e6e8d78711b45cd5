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
#ifndef DPTAILS_DP_OPTIM_HPP_
#define DPTAILS_DP_OPTIM_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dptails/accountant.hpp"
#include "dptails/cohort.hpp"
#include "dptails/models.hpp"
#include "dptails/random.hpp"

namespace dptails {

enum class OptimizerKind { kSgd, kAdam };
enum class PrivacyLevel { kNone, kLow, kHigh, kCustom };

std::string PrivacyLevelName(PrivacyLevel level);
PrivacyLevel ParsePrivacyLevel(const std::string& name);
std::string OptimizerName(OptimizerKind kind);
OptimizerKind ParseOptimizer(const std::string& name);

struct DPTrainingConfig {
  // Absent means non-private training (no clipping, no noise).
  std::optional<double> clip_norm;
  double noise_multiplier = 0.0;
  int batch_size = 64;
  int microbatch_count = 16;
  double learning_rate = 0.01;
  int epochs = 20;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  std::uint64_t seed = 0;
  PrivacyLevel level = PrivacyLevel::kNone;
  double delta = kDefaultDelta;

  bool is_private() const { return clip_norm.has_value(); }
  void Validate() const;

  // Binds (clip_norm, noise_multiplier) for a named level: none -> absent,
  // low -> (5.0, 0.1), high -> (1.0, 1.0). Other fields come from `base`.
  static DPTrainingConfig ForLevel(PrivacyLevel level, const DPTrainingConfig& base);
  static DPTrainingConfig ForLevel(PrivacyLevel level);
};

struct FamilySpec {
  ModelFamily family = ModelFamily::kLogisticBinary;
  int hidden = 16;
  double l2_lambda = 0.0;
};

// Inputs to the accountant, logged so every epsilon can be recomputed.
struct AccountingRecord {
  double sampling_rate = 0.0;
  double noise_multiplier = 0.0;
  std::int64_t steps = 0;
  double delta = kDefaultDelta;
};

struct TrainedModel {
  ModelParams params;
  PrivacySpend spend;
  std::optional<AccountingRecord> accounting;
  std::vector<double> training_trace;  // full-batch train loss after each epoch
  std::int64_t steps_taken = 0;
  std::string mechanism = "dp-sgd";
  // Records are projected to this norm before prediction (objective
  // perturbation only).
  std::optional<double> record_norm_bound;
  std::vector<std::string> notes;
};

// Features as the trained model expects them (applies record_norm_bound).
Eigen::MatrixXd PrepareFeatures(const TrainedModel& model, const Eigen::MatrixXd& features);
Eigen::VectorXd ModelScores(const TrainedModel& model, const Eigen::MatrixXd& features);

// g / max(1, |g| / C). Throws kNumeric on non-finite input.
Eigen::VectorXd ClipGradient(const Eigen::VectorXd& gradient, double clip_norm);

// (1/m) (sum_j clip(mean gradient of microbatch j) + N(0, sigma^2 C^2 I)).
// Non-private configs return the plain batch-mean gradient.
Eigen::VectorXd PrivatizedGradient(const ModelParams& params, const Eigen::MatrixXd& features,
                                   std::span<const int> labels, const DPTrainingConfig& config,
                                   Rng& noise_rng);

// Sum of clipped microbatch-mean gradients before noise.
Eigen::VectorXd ClippedMicrobatchSum(const PerExampleGradients& per_example, int microbatch_count,
                                     std::optional<double> clip_norm);

// Optimizer state shared by SGD and Adam (beta1 0.9, beta2 0.999, eps 1e-8).
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, Eigen::Index size);
  void Step(Eigen::VectorXd& theta, const Eigen::VectorXd& gradient);

 private:
  OptimizerKind kind_;
  double lr_;
  Eigen::VectorXd m_, v_;
  std::int64_t t_ = 0;
};

// One SGD step with the privatized gradient: theta - eta * g_tilde.
ModelParams DpSgdStep(const ModelParams& params, const Eigen::MatrixXd& features,
                      std::span<const int> labels, const DPTrainingConfig& config, Rng& noise_rng);

// Initial parameters: zeros for LR, U(-1/sqrt(fan_in), 1/sqrt(fan_in))
// weights with zero biases for MLP.
ModelParams InitialParams(const FamilySpec& spec, int input_dim, int num_classes,
                          std::uint64_t seed);

// Shuffled fixed-size batches (the last partial batch is dropped) for
// config.epochs epochs. Steps taken = epochs * floor(n / batch_size).
TrainedModel Train(const FamilySpec& spec, const Cohort& train, const DPTrainingConfig& config);
TrainedModel Train(const FamilySpec& spec, const CohortSplit& split, const DPTrainingConfig& config);

}  // namespace dptails

#endif  // DPTAILS_DP_OPTIM_HPP_
