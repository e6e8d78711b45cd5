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
#include "dptails/dp_optim.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "dptails/cohort.hpp"
#include "dptails/metrics.hpp"
#include "dptails/random.hpp"
#include "test_util.hpp"

namespace dptails {
namespace {

struct Batch {
  Eigen::MatrixXd x;
  std::vector<int> y;
};

Batch RandomBatch(int n, int d, double scale, Rng& rng) {
  Batch b{Eigen::MatrixXd(n, d), std::vector<int>(static_cast<std::size_t>(n))};
  for (int i = 0; i < n; ++i) {
    b.x.row(i) = scale * rng.NormalVector(d).transpose();
    b.y[static_cast<std::size_t>(i)] = rng.Uniform() < 0.5 ? 1 : 0;
  }
  return b;
}

TEST(ClipGradientTest, Examples) {
  Eigen::VectorXd g(2);
  g << 3.0, 4.0;
  const Eigen::VectorXd clipped = ClipGradient(g, 1.0);
  EXPECT_NEAR(clipped(0), 0.6, 1e-15);
  EXPECT_NEAR(clipped(1), 0.8, 1e-15);
  EXPECT_EQ(ClipGradient(g, 5.0), g);
  EXPECT_EQ(ClipGradient(Eigen::VectorXd::Zero(3), 0.1), Eigen::VectorXd::Zero(3));
  g(1) = std::nan("");
  EXPECT_EQ(CodeOf([&] { ClipGradient(g, 1.0); }), ErrorCode::kNumeric);
}

TEST(DpSgdStepTest, ReducesToSgdWhenInactive) {
  Rng rng(1);
  const Batch b = RandomBatch(64, 4, 1.0, rng);
  ModelParams p = ModelParams::Zeros(ModelFamily::kLogisticBinary, 4, 2, 0, 0.01);
  p.theta = rng.NormalVector(5);
  DPTrainingConfig config;
  config.clip_norm = 1e9;
  config.noise_multiplier = 0.0;
  config.microbatch_count = 64;
  config.learning_rate = 0.1;
  config.level = PrivacyLevel::kCustom;
  Rng noise(2);
  const ModelParams next = DpSgdStep(p, b.x, b.y, config, noise);
  const Eigen::VectorXd plain = p.theta - 0.1 * MeanGradient(p, b.x, b.y);
  EXPECT_LE((next.theta - plain).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(DpSgdStepTest, ClippedUpdateIsBounded) {
  Rng rng(3);
  const Batch b = RandomBatch(64, 4, 50.0, rng);
  ModelParams p = ModelParams::Zeros(ModelFamily::kLogisticBinary, 4, 2, 0, 0.0);
  p.theta = rng.NormalVector(5);
  DPTrainingConfig config;
  config.clip_norm = 1.0;
  config.microbatch_count = 64;
  config.learning_rate = 0.5;
  Rng noise(4);
  const ModelParams next = DpSgdStep(p, b.x, b.y, config, noise);
  EXPECT_LE((next.theta - p.theta).norm(), 0.5 * (1.0 + 1e-9));
}

TEST(DpSgdStepTest, DeterministicGivenRng) {
  Rng rng(5);
  const Batch b = RandomBatch(64, 3, 1.0, rng);
  const ModelParams p = ModelParams::Zeros(ModelFamily::kLogisticBinary, 3, 2, 0, 0.0);
  const DPTrainingConfig config = DPTrainingConfig::ForLevel(PrivacyLevel::kHigh);
  Rng a(9), c(9);
  EXPECT_EQ(DpSgdStep(p, b.x, b.y, config, a).theta, DpSgdStep(p, b.x, b.y, config, c).theta);
}

TEST(DpSgdStepTest, MicrobatchMustDivideBatch) {
  Rng rng(6);
  const Batch b = RandomBatch(60, 3, 1.0, rng);
  const ModelParams p = ModelParams::Zeros(ModelFamily::kLogisticBinary, 3, 2, 0, 0.0);
  DPTrainingConfig config = DPTrainingConfig::ForLevel(PrivacyLevel::kHigh);
  config.microbatch_count = 16;
  Rng noise(1);
  EXPECT_EQ(CodeOf([&] { DpSgdStep(p, b.x, b.y, config, noise); }), ErrorCode::kConfig);
}

TEST(DpSgdStepTest, SensitivityOfClippedSum) {
  Rng rng(7);
  const double clip = 1.5;
  for (int t = 0; t < 50; ++t) {
    Batch b = RandomBatch(64, 3, 10.0, rng);
    ModelParams p = ModelParams::Zeros(ModelFamily::kLogisticBinary, 3, 2, 0, 0.0);
    p.theta = rng.NormalVector(4);
    const PerExampleGradients g1 = LossAndPerExampleGrads(p, b.x, b.y).per_example;
    // Replace microbatch 5 (rows 20..23) wholesale.
    for (int i = 20; i < 24; ++i) {
      b.x.row(i) = 10.0 * rng.NormalVector(3).transpose();
      b.y[static_cast<std::size_t>(i)] = 1 - b.y[static_cast<std::size_t>(i)];
    }
    const PerExampleGradients g2 = LossAndPerExampleGrads(p, b.x, b.y).per_example;
    const double diff =
        (ClippedMicrobatchSum(g1, 16, clip) - ClippedMicrobatchSum(g2, 16, clip)).norm();
    EXPECT_LE(diff, 2.0 * clip + 1e-12);
  }
}

TEST(DpSgdStepTest, NoiseCalibration) {
  // Noise in the update is eta * N(0, sigma^2 C^2) / m per coordinate.
  Rng rng(8);
  const Batch b = RandomBatch(64, 2, 1.0, rng);
  const ModelParams p = ModelParams::Zeros(ModelFamily::kLogisticBinary, 2, 2, 0, 0.0);
  DPTrainingConfig config;
  config.clip_norm = 2.0;
  config.noise_multiplier = 1.3;
  config.microbatch_count = 16;
  config.learning_rate = 0.05;
  config.level = PrivacyLevel::kCustom;
  const PerExampleGradients g = LossAndPerExampleGrads(p, b.x, b.y).per_example;
  const Eigen::VectorXd clean = ClippedMicrobatchSum(g, 16, 2.0) / 16.0;
  Rng noise(10);
  const int steps = 10000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(3), sq = Eigen::VectorXd::Zero(3);
  for (int s = 0; s < steps; ++s) {
    const ModelParams next = DpSgdStep(p, b.x, b.y, config, noise);
    const Eigen::VectorXd update = (p.theta - next.theta) - 0.05 * clean;
    sum += update;
    sq += update.cwiseProduct(update);
  }
  const double expected = 0.05 * 1.3 * 2.0 / 16.0;
  for (int j = 0; j < 3; ++j) {
    const double mean = sum(j) / steps;
    const double sd = std::sqrt(sq(j) / steps - mean * mean);
    EXPECT_NEAR(sd / expected, 1.0, 0.03);
  }
}

TEST(TrainTest, ReducesToPlainSgdReference) {
  CohortConfig cc;
  cc.n = 300;
  cc.d = 3;
  cc.seed = 2;
  const Cohort cohort = GenerateCohort(cc);
  DPTrainingConfig config;
  config.epochs = 3;
  config.learning_rate = 0.2;
  config.seed = 17;
  const TrainedModel model = Train({ModelFamily::kLogisticBinary, 16, 0.01}, cohort, config);

  // Reference: same shuffle stream, closed-form logistic gradient.
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(4);
  Rng shuffle(DeriveSeed(17, {"dp-sgd-shuffle"}));
  for (int e = 0; e < 3; ++e) {
    const std::vector<std::size_t> perm = shuffle.Permutation(cohort.size());
    for (std::size_t s = 0; s < cohort.size() / 64; ++s) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(4);
      for (std::size_t r = 0; r < 64; ++r) {
        const std::size_t i = perm[s * 64 + r];
        Eigen::VectorXd z(4);
        z << cohort.features.row(static_cast<Eigen::Index>(i)).transpose(), 1.0;
        const double p = 1.0 / (1.0 + std::exp(-z.dot(theta)));
        g += (p - cohort.labels[i]) * z;
      }
      g /= 64.0;
      g.head(3) += 0.01 * theta.head(3);
      theta -= 0.2 * g;
    }
  }
  EXPECT_LE((model.params.theta - theta).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_EQ(model.steps_taken, 3 * (300 / 64));
  EXPECT_EQ(model.spend.epsilon, kInfinity);
  EXPECT_EQ(model.spend.delta, 0.0);
  EXPECT_EQ(model.training_trace.size(), 3u);
}

TEST(TrainTest, SeparableCohortAndSpend) {
  CohortConfig cc;
  cc.n = 2000;
  cc.d = 4;
  cc.class_separation = 6.0;
  cc.seed = 3;
  const Cohort cohort = GenerateCohort(cc);
  DPTrainingConfig config;
  config.epochs = 20;
  config.learning_rate = 0.1;
  const TrainedModel none = Train({}, cohort, config);
  const Eigen::VectorXd s = ModelScores(none, cohort.features);
  const std::vector<double> scores(s.begin(), s.end());
  EXPECT_GE(Auroc(scores, cohort.labels), 0.95);

  const TrainedModel high = Train({}, cohort, DPTrainingConfig::ForLevel(PrivacyLevel::kHigh, config));
  EXPECT_TRUE(std::isfinite(high.spend.epsilon));
  EXPECT_GT(high.spend.epsilon, 0.0);
  ASSERT_TRUE(high.accounting.has_value());
  EXPECT_EQ(high.spend.epsilon, ComputeDpSgdSpend(high.accounting->sampling_rate,
                                                  high.accounting->noise_multiplier,
                                                  high.accounting->steps, high.accounting->delta)
                                    .epsilon);
  EXPECT_DOUBLE_EQ(high.accounting->sampling_rate, 64.0 / 2000.0);
}

TEST(TrainTest, ZeroEpochs) {
  CohortConfig cc;
  cc.n = 200;
  cc.seed = 4;
  const Cohort cohort = GenerateCohort(cc);
  DPTrainingConfig config = DPTrainingConfig::ForLevel(PrivacyLevel::kHigh);
  config.epochs = 0;
  const FamilySpec mlp{ModelFamily::kMlp, 8, 0.0};
  const TrainedModel model = Train(mlp, cohort, config);
  EXPECT_EQ(model.params.theta, InitialParams(mlp, 4, 2, config.seed).theta);
  EXPECT_EQ(model.spend.epsilon, 0.0);
  EXPECT_EQ(model.steps_taken, 0);
}

TEST(TrainTest, DivergenceNamesEpoch) {
  CohortConfig cc;
  cc.n = 256;
  cc.seed = 5;
  cc.class_separation = 20.0;
  const Cohort cohort = GenerateCohort(cc);
  DPTrainingConfig config;
  // A ridge step of size eta * lambda * theta overflows after two batches.
  config.learning_rate = 1e300;
  config.epochs = 2;
  try {
    Train({ModelFamily::kLogisticBinary, 4, 1.0}, cohort, config);
    FAIL() << "expected divergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTraining);
    EXPECT_NE(std::string(e.what()).find("epoch 0"), std::string::npos) << e.what();
  }
}

TEST(TrainTest, AdamAndMulticlassRun) {
  CohortConfig cc;
  cc.n = 640;
  cc.num_classes = 3;
  cc.positive_prevalence = {0.3};
  cc.class_separation = 4.0;
  cc.seed = 6;
  const Cohort cohort = GenerateCohort(cc);
  DPTrainingConfig config = DPTrainingConfig::ForLevel(PrivacyLevel::kLow);
  config.optimizer = OptimizerKind::kAdam;
  config.epochs = 5;
  const TrainedModel a = Train({ModelFamily::kLogisticMultinomial, 16, 0.0}, cohort, config);
  const TrainedModel b = Train({ModelFamily::kLogisticMultinomial, 16, 0.0}, cohort, config);
  EXPECT_EQ(a.params.theta, b.params.theta);
  EXPECT_GT(AurocMicro(Predict(a.params, cohort.features), cohort.labels), 0.8);
  EXPECT_LT(a.training_trace.back(), a.training_trace.front() + 1e-12);
}

TEST(TrainTest, LevelsBindToNamedPairs) {
  EXPECT_FALSE(DPTrainingConfig::ForLevel(PrivacyLevel::kNone).clip_norm.has_value());
  EXPECT_EQ(*DPTrainingConfig::ForLevel(PrivacyLevel::kLow).clip_norm, 5.0);
  EXPECT_EQ(DPTrainingConfig::ForLevel(PrivacyLevel::kLow).noise_multiplier, 0.1);
  EXPECT_EQ(*DPTrainingConfig::ForLevel(PrivacyLevel::kHigh).clip_norm, 1.0);
  EXPECT_EQ(DPTrainingConfig::ForLevel(PrivacyLevel::kHigh).noise_multiplier, 1.0);
  EXPECT_EQ(ParsePrivacyLevel("high"), PrivacyLevel::kHigh);
  EXPECT_EQ(CodeOf([] { ParsePrivacyLevel("extreme"); }), ErrorCode::kConfig);
}

}  // namespace
}  // namespace dptails
