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
#ifndef DPTAILS_OBJECTIVE_PERTURBATION_HPP_
#define DPTAILS_OBJECTIVE_PERTURBATION_HPP_

#include <cstdint>

#include <Eigen/Core>

#include "dptails/cohort.hpp"
#include "dptails/dp_optim.hpp"
#include "dptails/random.hpp"

namespace dptails {

// (eps_p, 0)-DP regularized logistic regression by objective perturbation.
//
// The parameter vector f = [w; b] carries the intercept, and the whole of f
// is regularized by lambda: strong convexity in every coordinate is what the
// guarantee rests on.
struct ObjPertConfig {
  double eps_p = 1.0;
  double lambda = 1e-3;
  // Uppercase C: each record's feature vector is projected to norm <= C.
  double record_norm_bound = 1.0;
  // Lowercase c: smoothness constant of the loss (1/4 for logistic).
  double smoothness = 0.25;
  std::uint64_t seed = 0;

  void Validate() const;
};

struct ObjPertDerived {
  double eps_prime = 0.0;
  double slack = 0.0;  // Delta
  double beta = 0.0;   // eps_prime / 2
  bool slack_branch = false;
};

// eps' = eps_p - log(1 + 2c/(n L) + c^2/(n^2 L^2)). When eps' <= 0:
// Delta = c / (n (e^{eps_p / 4} - 1)) - L and eps' = eps_p / 2.
ObjPertDerived DeriveObjPertParameters(std::int64_t n, const ObjPertConfig& config);

// Density proportional to exp(-beta |b|): uniform direction, Gamma(dim, beta)
// norm.
Eigen::VectorXd SampleNoiseVector(int dim, double beta, Rng& rng);

// Projects every row to norm <= bound.
Eigen::MatrixXd ProjectRecords(const Eigen::MatrixXd& features, double bound);

// argmin (1/n) sum CE + (lambda + slack)/2 |f|^2 + (1/n) noise^T f on
// already-projected records, to gradient norm 1e-8.
ModelParams SolvePerturbedObjective(const Eigen::MatrixXd& features, std::span<const int> labels,
                                    double lambda, double slack, const Eigen::VectorXd& noise);

struct ObjPertResult {
  TrainedModel model;
  ObjPertDerived derived;
  Eigen::VectorXd noise;
};

ObjPertResult TrainObjectivePerturbation(const Cohort& train, const ObjPertConfig& config);
ObjPertResult TrainObjectivePerturbation(const CohortSplit& split, const ObjPertConfig& config);

}  // namespace dptails

#endif  // DPTAILS_OBJECTIVE_PERTURBATION_HPP_
