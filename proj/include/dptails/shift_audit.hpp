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
#ifndef DPTAILS_SHIFT_AUDIT_HPP_
#define DPTAILS_SHIFT_AUDIT_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dptails/cohort.hpp"
#include "dptails/dp_optim.hpp"
#include "dptails/metrics.hpp"
#include "dptails/models.hpp"

namespace dptails {

inline constexpr double kShiftAlpha = 0.05;
inline constexpr std::size_t kMinShiftSide = 10;
inline constexpr std::size_t kMalignancyTopK = 100;

enum class DomainModelKind {
  kRidgeLogistic,
  // Always predicts probability 1/2; a chance-level control.
  kConstant,
};

struct DomainModelSpec {
  DomainModelKind kind = DomainModelKind::kRidgeLogistic;
  double l2_lambda = 1e-3;
  double fit_fraction = 0.7;
};

struct ShiftReport {
  int year = 0;
  double domain_accuracy = 0.0;
  std::int64_t n_eval = 0;
  double p_value = 1.0;
  bool significant = false;  // p_value < 0.05
  // Task accuracy on the most test-like records; lower = more malignant.
  std::optional<double> malignancy_accuracy;
  std::vector<std::string> notes;
};

struct DomainAudit {
  ShiftReport report;
  // LR-binary over raw features; class 1 = test origin.
  ModelParams domain_model;
};

// Balanced origin-labelled mixture of p (label 0) and q (label 1), split
// into stratified fit/eval parts. Accuracy on eval is tested against 1/2
// with the exact binomial test. Throws kInsufficientData when either side
// has fewer than 10 records.
DomainAudit DomainClassifierSignificance(const Cohort& train, const Cohort& test,
                                         const DomainModelSpec& spec, std::uint64_t seed,
                                         int year = 0);

// Accuracy of `task_model` on the min(100, |q|) q records with the highest
// test-origin probability (ties by ascending id). Stores the value in
// `report`. Throws kProcedureOrder unless the shift is significant.
double ShiftMalignancy(ShiftReport& report, const Cohort& test, const ModelParams& domain_model,
                       const TrainedModel& task_model);

struct RobustnessCorrelation {
  TestResult test;
  std::string interpretation;
};

// Pearson correlation of per-year generalization gaps (in-distribution
// metric minus shifted metric) with malignancy accuracies. A positive r
// means a lack of robustness.
RobustnessCorrelation CorrelateRobustness(std::span<const double> generalization_gaps,
                                          std::span<const double> malignancies);

// CSV with header "year,malignancy,p_value,domain_accuracy,n_eval,significant".
std::string ShiftReportsToCsv(std::span<const ShiftReport> reports);

}  // namespace dptails

#endif  // DPTAILS_SHIFT_AUDIT_HPP_
