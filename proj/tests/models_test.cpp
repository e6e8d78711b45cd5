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
#include "dptails/models.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "dptails/random.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace dptails {
namespace {

ModelParams RandomParams(ModelFamily family, int d, int k, int h, double lambda, Rng& rng) {
  ModelParams p = ModelParams::Zeros(family, d, k, h, lambda);
  p.theta = rng.NormalVector(p.size());
  return p;
}

double SingleLoss(const ModelParams& p, const Eigen::VectorXd& x, int y) {
  Eigen::MatrixXd row = x.transpose();
  const std::vector<int> label = {y};
  return MeanLoss(p, row, label);
}

TEST(PredictTest, ZeroParams) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 3);
  const ModelParams lr = ModelParams::Zeros(ModelFamily::kLogisticBinary, 3, 2, 0, 0.0);
  EXPECT_TRUE(Predict(lr, x).isConstant(0.5));
  const ModelParams mn = ModelParams::Zeros(ModelFamily::kLogisticMultinomial, 3, 4, 0, 0.0);
  const Eigen::MatrixXd p = Predict(mn, x);
  EXPECT_EQ(p.cols(), 4);
  EXPECT_TRUE(p.isConstant(0.25));
}

TEST(PredictTest, RowsAreDistributions) {
  Rng rng(1);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(20, 4) * 3.0;
  for (ModelFamily f : {ModelFamily::kLogisticBinary, ModelFamily::kLogisticMultinomial,
                        ModelFamily::kMlp}) {
    const int k = f == ModelFamily::kLogisticBinary ? 2 : 3;
    const ModelParams p = RandomParams(f, 4, k, 5, 0.0, rng);
    const Eigen::MatrixXd probs = Predict(p, x);
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
      EXPECT_NEAR(probs.row(i).sum(), 1.0, 1e-9);
      EXPECT_GE(probs.row(i).minCoeff(), 0.0);
    }
  }
  const ModelParams p = RandomParams(ModelFamily::kLogisticBinary, 4, 2, 0, 0.0, rng);
  EXPECT_EQ(CodeOf([&] { Predict(p, Eigen::MatrixXd::Zero(2, 3)); }), ErrorCode::kShape);
}

TEST(LossTest, UniformPrediction) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 2);
  const std::vector<int> y = {0, 1, 0, 1};
  const ModelParams p = ModelParams::Zeros(ModelFamily::kLogisticBinary, 2, 2, 0, 0.5);
  EXPECT_NEAR(MeanLoss(p, x, y), std::log(2.0), 1e-9);
  EXPECT_EQ(CodeOf([&] { LossAndPerExampleGrads(p, Eigen::MatrixXd(0, 2), {}); }),
            ErrorCode::kDomain);
}

TEST(LossTest, LogisticClosedFormGradient) {
  Rng rng(2);
  const ModelParams p = RandomParams(ModelFamily::kLogisticBinary, 3, 2, 0, 0.0, rng);
  const Eigen::VectorXd x = rng.NormalVector(3);
  const double s = 1.0 / (1.0 + std::exp(-(x.dot(p.theta.head(3)) + p.theta(3))));
  Eigen::VectorXd z(4);
  z << x, 1.0;
  EXPECT_LT((RecordLossGradient(p, x, 1) - (s - 1.0) * z).norm(), 1e-12);
  EXPECT_LT((RecordLossGradient(p, x, 0) - s * z).norm(), 1e-12);
}

TEST(LossTest, PerExampleGradientsMatchFiniteDifferences) {
  Rng rng(3);
  const double h = 1e-5;
  for (ModelFamily f : {ModelFamily::kLogisticBinary, ModelFamily::kLogisticMultinomial,
                        ModelFamily::kMlp}) {
    const int k = f == ModelFamily::kLogisticBinary ? 2 : 3;
    double worst = 0.0;
    for (int draw = 0; draw < 100; ++draw) {
      const ModelParams p = RandomParams(f, 3, k, 4, 0.3, rng);
      const Eigen::VectorXd x = rng.NormalVector(3);
      const int y = static_cast<int>(rng.UniformInt(static_cast<std::uint64_t>(k)));
      Eigen::MatrixXd row = x.transpose();
      const std::vector<int> label = {y};
      const Eigen::VectorXd analytic = LossAndPerExampleGrads(p, row, label).per_example.row(0);
      for (Eigen::Index j = 0; j < p.size(); ++j) {
        ModelParams plus = p, minus = p;
        plus.theta(j) += h;
        minus.theta(j) -= h;
        const double fd = (SingleLoss(plus, x, y) - SingleLoss(minus, x, y)) / (2 * h);
        worst = std::max(worst, std::abs(fd - analytic(j)));
      }
    }
    EXPECT_LE(worst, 1e-5) << ModelFamilyName(f);
  }
}

TEST(LossTest, RowMeanIsFullBatchGradient) {
  Rng rng(4);
  const ModelParams p = RandomParams(ModelFamily::kMlp, 3, 3, 4, 0.2, rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(10, 3);
  std::vector<int> y(10);
  for (int i = 0; i < 10; ++i) y[static_cast<std::size_t>(i)] = i % 3;
  const auto lg = LossAndPerExampleGrads(p, x, y);
  const Eigen::VectorXd mean = lg.per_example.colwise().mean().transpose();
  EXPECT_LT((mean - MeanGradient(p, x, y)).norm(), 1e-12);
}

TEST(HessianTest, SingleRecordAtZero) {
  const ModelParams p = ModelParams::Zeros(ModelFamily::kLogisticBinary, 1, 2, 0, 0.0);
  Eigen::MatrixXd x(1, 1);
  x << 1.0;
  const Eigen::MatrixXd h = LrHessian(p, x, 0.0);
  EXPECT_TRUE(h.isApprox(Eigen::MatrixXd::Constant(2, 2, 0.25)));
}

TEST(HessianTest, SymmetricAndBoundedBelow) {
  Rng rng(5);
  const double lambda = 0.3, damping = 0.01;
  const ModelParams p = RandomParams(ModelFamily::kLogisticBinary, 4, 2, 0, lambda, rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(30, 4);
  const Eigen::MatrixXd h = LrHessian(p, x, damping);
  EXPECT_LE((h - h.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> all(h);
  EXPECT_GE(all.eigenvalues().minCoeff(), damping - 1e-9);
  // The ridge covers the weight block only, so it is bounded by lambda + damping.
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> weights(h.topLeftCorner(4, 4));
  EXPECT_GE(weights.eigenvalues().minCoeff(), lambda + damping - 1e-9);
  const ModelParams mlp = ModelParams::Zeros(ModelFamily::kMlp, 4, 2, 3, 0.0);
  EXPECT_EQ(CodeOf([&] { LrHessian(mlp, x, 0.0); }), ErrorCode::kUnsupportedFamily);
}

TEST(HessianTest, MatchesFiniteDifferenceOfMeanGradient) {
  Rng rng(6);
  for (double lambda : {0.0, 0.25}) {
    const ModelParams p = RandomParams(ModelFamily::kLogisticBinary, 3, 2, 0, lambda, rng);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(50, 3) * 2.0;
    std::vector<int> y(50);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = rng.Uniform() < 0.5 ? 1 : 0;
    const Eigen::MatrixXd h = LrHessian(p, x, 0.0);
    const double step = 1e-5;
    Eigen::MatrixXd fd(4, 4);
    for (Eigen::Index j = 0; j < 4; ++j) {
      ModelParams plus = p, minus = p;
      plus.theta(j) += step;
      minus.theta(j) -= step;
      fd.col(j) = (MeanGradient(plus, x, y) - MeanGradient(minus, x, y)) / (2 * step);
    }
    EXPECT_LE((h - fd).cwiseAbs().maxCoeff(), 1e-4);
    for (int t = 0; t < 5; ++t) {
      const Eigen::VectorXd v = rng.NormalVector(4);
      ModelParams plus = p, minus = p;
      plus.theta += step * v;
      minus.theta -= step * v;
      const Eigen::VectorXd dir = (MeanGradient(plus, x, y) - MeanGradient(minus, x, y)) / (2 * step);
      EXPECT_LE((dir - h * v).cwiseAbs().maxCoeff(), 1e-4);
    }
  }
}

TEST(ConvexityTest, MidpointConvexAlongSegments) {
  Rng rng(7);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(40, 3) * 2.0;
  std::vector<int> y(40);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = rng.Uniform() < 0.4 ? 1 : 0;
  for (int t = 0; t < 50; ++t) {
    const ModelParams a = RandomParams(ModelFamily::kLogisticBinary, 3, 2, 0, 0.1, rng);
    const ModelParams b = RandomParams(ModelFamily::kLogisticBinary, 3, 2, 0, 0.1, rng);
    ModelParams mid = a;
    mid.theta = 0.5 * (a.theta + b.theta);
    EXPECT_LE(MeanLoss(mid, x, y), 0.5 * (MeanLoss(a, x, y) + MeanLoss(b, x, y)) + 1e-9);
  }
}

TEST(NewtonTest, MatchesIndependentSolver) {
  Rng rng(8);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(80, 3) * 2.0;
  std::vector<int> y(80);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = rng.Uniform() < 0.5 ? 1 : 0;
  const ModelParams fit = FitRidgeLogistic(x, y, 0.05);
  const Eigen::VectorXd reference =
      oracle::NewtonLogistic(x, y, Eigen::VectorXd::Ones(80), 80.0, 0.05);
  EXPECT_LT((fit.theta - reference).norm(), 1e-7);
  EXPECT_LT(MeanGradient(fit, x, y).norm(), 1e-8);
}

TEST(ModelParamsTest, LayoutSizes) {
  EXPECT_EQ(ModelParams::ParamCount(ModelFamily::kLogisticBinary, 5, 2, 0), 6);
  EXPECT_EQ(ModelParams::ParamCount(ModelFamily::kLogisticMultinomial, 5, 3, 0), 18);
  EXPECT_EQ(ModelParams::ParamCount(ModelFamily::kMlp, 5, 3, 4), 4 * 5 + 4 + 3 * 4 + 3);
  ModelParams bad = ModelParams::Zeros(ModelFamily::kLogisticBinary, 5, 2, 0, 0.0);
  bad.theta.resize(3);
  EXPECT_EQ(CodeOf([&] { bad.Validate(); }), ErrorCode::kShape);
  EXPECT_EQ(ParseModelFamily("mlp-1"), ModelFamily::kMlp);
}

}  // namespace
}  // namespace dptails
