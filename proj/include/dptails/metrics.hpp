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
#ifndef DPTAILS_METRICS_HPP_
#define DPTAILS_METRICS_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace dptails {

struct ConfusionMatrix {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;

  std::int64_t n() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::string method;
};

// Tie-adjusted pair counting: (#concordant + 0.5 #tied) / (P N).
// Throws kUndefinedMetric when labels hold a single class.
double Auroc(std::span<const double> scores, std::span<const int> labels);

// Average precision over distinct score thresholds (descending):
// sum_t (R_t - R_{t-1}) P_t. Throws kUndefinedMetric without positives.
double Auprc(std::span<const double> scores, std::span<const int> labels);

// One-vs-rest flattening of an n x K score matrix, micro-averaged.
double AurocMicro(const Eigen::MatrixXd& scores, std::span<const int> labels);
double AuprcMicro(const Eigen::MatrixXd& scores, std::span<const int> labels);

// Positive prediction iff score >= threshold.
ConfusionMatrix Confusion(std::span<const double> scores, std::span<const int> labels,
                          double threshold = 0.5);

// Two-sided exact binomial test, probability-mass method: sums P(j) over
// every j with P(j) <= P(k) (1 + 1e-12). Computed in log space.
TestResult BinomialTest(std::int64_t successes, std::int64_t trials, double p0 = 0.5);

// Product-moment r with p from the t transform on n - 2 degrees of freedom.
// Throws kUndefinedMetric on zero variance, kDomain on fewer than 3 pairs.
TestResult Pearson(std::span<const double> x, std::span<const double> y);

// Pearson r of midranks.
double Spearman(std::span<const double> x, std::span<const double> y);

// Sample mean and standard deviation (n - 1 denominator; 0 for n < 2).
struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
};
MeanStd ComputeMeanStd(std::span<const double> values);

}  // namespace dptails

#endif  // DPTAILS_METRICS_HPP_
