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
#include "dptails/objective_perturbation.hpp"

#include <cmath>

#include "dptails/error.hpp"

namespace dptails {

void ObjPertConfig::Validate() const {
  Require(eps_p > 0.0 && std::isfinite(eps_p), ErrorCode::kConfig, "eps_p: must be positive");
  Require(lambda > 0.0 && std::isfinite(lambda), ErrorCode::kConfig, "lambda: must be positive");
  Require(record_norm_bound > 0.0, ErrorCode::kConfig, "record_norm_bound: must be positive");
  Require(smoothness > 0.0, ErrorCode::kConfig, "smoothness_constant: must be positive");
}

ObjPertDerived DeriveObjPertParameters(std::int64_t n, const ObjPertConfig& config) {
  config.Validate();
  Require(n >= 1, ErrorCode::kDomain, "objective perturbation needs records");
  const auto nf = static_cast<double>(n);
  const double c = config.smoothness;
  const double ratio = c / (nf * config.lambda);
  ObjPertDerived out;
  out.eps_prime = config.eps_p - std::log(1.0 + 2.0 * ratio + ratio * ratio);
  if (out.eps_prime > 0.0) {
    out.slack = 0.0;
  } else {
    out.slack_branch = true;
    out.slack = c / (nf * std::expm1(config.eps_p / 4.0)) - config.lambda;
    out.eps_prime = config.eps_p / 2.0;
  }
  out.beta = out.eps_prime / 2.0;
  return out;
}

Eigen::VectorXd SampleNoiseVector(int dim, double beta, Rng& rng) {
  Require(dim >= 1, ErrorCode::kDomain, "noise dimension must be >= 1");
  Require(beta > 0.0 && std::isfinite(beta), ErrorCode::kDomain, "noise rate beta must be positive");
  const Eigen::VectorXd direction = rng.UnitVector(dim);
  // Gamma(dim, beta) as a sum of dim exponentials.
  double norm = 0.0;
  for (int i = 0; i < dim; ++i) norm += rng.Exponential(beta);
  return norm * direction;
}

Eigen::MatrixXd ProjectRecords(const Eigen::MatrixXd& features, double bound) {
  Eigen::MatrixXd out = features;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    if (norm > bound) out.row(i) *= bound / norm;
  }
  return out;
}

ModelParams SolvePerturbedObjective(const Eigen::MatrixXd& features, std::span<const int> labels,
                                    double lambda, double slack, const Eigen::VectorXd& noise) {
  const auto n = static_cast<double>(features.rows());
  const Eigen::Index p = features.cols() + 1;
  Require(noise.size() == p, ErrorCode::kShape, "noise vector must have length d + 1");
  const Eigen::VectorXd ridge = Eigen::VectorXd::Constant(p, lambda + slack);
  NewtonOptions options;
  options.gradient_tolerance = 1e-8;
  const NewtonResult fit = FitLogisticNewton(features, labels, ridge, noise / n, options);
  ModelParams params = ModelParams::Zeros(ModelFamily::kLogisticBinary,
                                          static_cast<int>(features.cols()), 2, 0, lambda);
  params.theta = fit.theta;
  return params;
}

ObjPertResult TrainObjectivePerturbation(const Cohort& train, const ObjPertConfig& config) {
  config.Validate();
  Require(!train.empty(), ErrorCode::kDomain, "training cohort is empty");
  for (int y : train.labels) {
    Require(y == 0 || y == 1, ErrorCode::kUnsupportedFamily,
            "objective perturbation supports binary tasks only");
  }
  ObjPertResult out;
  out.derived = DeriveObjPertParameters(static_cast<std::int64_t>(train.size()), config);
  Rng rng(DeriveSeed(config.seed, {"objective-perturbation"}));
  out.noise = SampleNoiseVector(static_cast<int>(train.dim()) + 1, out.derived.beta, rng);
  const Eigen::MatrixXd projected = ProjectRecords(train.features, config.record_norm_bound);
  out.model.params =
      SolvePerturbedObjective(projected, train.labels, config.lambda, out.derived.slack, out.noise);
  out.model.mechanism = "objective-perturbation";
  out.model.spend = {config.eps_p, 0.0, std::nullopt};
  out.model.record_norm_bound = config.record_norm_bound;
  out.model.notes.push_back("records projected to norm <= C = " +
                            std::to_string(config.record_norm_bound) +
                            "; smoothness c = " + std::to_string(config.smoothness));
  if (out.derived.slack_branch) {
    out.model.notes.push_back("eps' <= 0: slack branch taken, Delta = " +
                              std::to_string(out.derived.slack));
  }
  return out;
}

ObjPertResult TrainObjectivePerturbation(const CohortSplit& split, const ObjPertConfig& config) {
  return TrainObjectivePerturbation(split.train, config);
}

}  // namespace dptails
