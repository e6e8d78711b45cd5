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
#ifndef DPTAILS_INFLUENCE_HPP_
#define DPTAILS_INFLUENCE_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "dptails/cohort.hpp"
#include "dptails/metrics.hpp"
#include "dptails/models.hpp"

namespace dptails {

// Upweighting influence of a training record on a test record's loss,
//   I(z_train, z_test) = -grad L(z_test)^T H^{-1} grad L(z_train),
// evaluated at the given parameters with H the Hessian of the training
// objective.
//
// Sign convention (fixed against leave-one-out retraining): removing z_train
// changes the test loss by about -I / n. A negative value therefore means
// the training record lowers the test loss: negative = helpful,
// positive = harmful.
inline constexpr double kDefaultInfluenceDamping = 1e-3;

enum class HessianSolver { kDense, kConjugateGradient };

// Damping used when none is given: 1e-3 if lambda == 0, else 0.
double DefaultDamping(const ModelParams& params);

class InfluenceEngine {
 public:
  // Builds H from `hessian_data` (the training cohort). Throws
  // kUnsupportedFamily for non-LR models and kConditioning when H is
  // numerically singular.
  InfluenceEngine(const ModelParams& params, const Eigen::MatrixXd& hessian_data,
                  std::optional<double> damping = std::nullopt,
                  HessianSolver solver = HessianSolver::kDense);

  // H^{-1} v.
  Eigen::VectorXd Solve(const Eigen::VectorXd& v) const;
  double Pair(const Eigen::VectorXd& x_train, int y_train, const Eigen::VectorXd& x_test,
              int y_test) const;

  const Eigen::MatrixXd& hessian() const { return hessian_; }
  double damping() const { return damping_; }
  HessianSolver solver() const { return solver_; }
  const ModelParams& params() const { return params_; }
  // Relative residual of the last conjugate-gradient solve (0 for dense).
  double last_residual() const { return last_residual_; }

 private:
  ModelParams params_;
  double damping_;
  HessianSolver solver_;
  Eigen::MatrixXd hessian_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  mutable double last_residual_ = 0.0;
};

// One-shot pair evaluation.
double InfluencePair(const ModelParams& params, const Eigen::MatrixXd& hessian_data,
                     const Eigen::VectorXd& x_train, int y_train, const Eigen::VectorXd& x_test,
                     int y_test, std::optional<double> damping = std::nullopt,
                     HessianSolver solver = HessianSolver::kDense);

struct InfluenceMatrix {
  Eigen::MatrixXd values;  // |train| x |test|
  std::vector<std::int64_t> train_ids;
  std::vector<std::int64_t> test_ids;
  std::vector<int> train_labels, train_groups;
  std::vector<int> test_labels, test_groups;
  std::string model_fingerprint;
  double damping = 0.0;

  // Columns restricted to the given test positions, in that order.
  InfluenceMatrix SelectTestColumns(const std::vector<std::size_t>& columns) const;
};

std::string ModelFingerprint(const ModelParams& params);

InfluenceMatrix ComputeInfluenceMatrix(const InfluenceEngine& engine, const Cohort& train_subset,
                                       const Cohort& test_subset);

struct GroupInfluenceSummary {
  std::vector<int> groups;  // ascending
  // group_values(g, t): summed influence of group g's rows on test column t.
  Eigen::MatrixXd group_values;
  std::vector<MeanStd> per_group;  // over test columns
  int most_helpful_group = 0;      // smallest mean (most negative)
  int most_harmful_group = 0;      // largest mean
};

// assignment maps every train id to a group. Throws kAssignment for
// unassigned ids.
GroupInfluenceSummary GroupInfluence(const InfluenceMatrix& matrix,
                                     const std::map<std::int64_t, int>& assignment);
std::map<std::int64_t, int> AssignByLabel(const InfluenceMatrix& matrix);
std::map<std::int64_t, int> AssignByGroup(const InfluenceMatrix& matrix);

// Test column positions ranked by influence variance over train rows,
// descending; ties by ascending test id. k is clamped to the column count.
std::vector<std::size_t> TopVarianceTestPoints(const InfluenceMatrix& matrix, std::size_t k = 100);

enum class InfluenceDirection { kHelpful, kHarmful };

struct InfluencerFrequencyTable {
  InfluenceDirection direction = InfluenceDirection::kHelpful;
  // (train id, count) sorted by count descending, then id.
  std::vector<std::pair<std::int64_t, std::int64_t>> counts;
  std::size_t test_points = 0;
  // max count / test points.
  double concentration = 0.0;
};

// Per test column the most helpful (minimum value) or most harmful (maximum
// value) train row is tallied; ties go to the first row.
InfluencerFrequencyTable InfluencerFrequency(const InfluenceMatrix& matrix,
                                             InfluenceDirection direction);

// Largest |value| in the matrix.
double MaxAbsInfluence(const InfluenceMatrix& matrix);

// Mean over columns of the per-column variance across train rows.
double MeanColumnVariance(const InfluenceMatrix& matrix);

// Influence-matrix CSV: header "train_id,<test ids...>", one row per train id.
std::string InfluenceMatrixToCsv(const InfluenceMatrix& matrix);

}  // namespace dptails

#endif  // DPTAILS_INFLUENCE_HPP_
