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
#ifndef DPTAILS_FAIRNESS_AUDIT_HPP_
#define DPTAILS_FAIRNESS_AUDIT_HPP_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dptails/metrics.hpp"

namespace dptails {

// A gap that may be undefined when a denominator vanishes in either group.
struct Gap {
  std::optional<double> value;
  std::string undefined_reason;

  bool defined() const { return value.has_value(); }
};

// Every gap is (group_1 quantity) - (group_2 quantity); positive values
// favour group_1.
struct FairnessReport {
  int group_1 = 0;
  int group_2 = 1;
  double threshold = 0.5;
  Gap auroc_gap;
  Gap parity_gap;       // positive-prediction rate
  Gap recall_gap;       // true-positive rate
  Gap specificity_gap;  // true-negative rate
  ConfusionMatrix confusion_1;
  ConfusionMatrix confusion_2;
  std::optional<double> auroc_1;
  std::optional<double> auroc_2;
};

// Throws kDomain naming the group when either group has no records.
FairnessReport FairnessGaps(std::span<const double> scores, std::span<const int> labels,
                            std::span<const int> groups, int group_1, int group_2,
                            double threshold = 0.5);

inline constexpr const char* kGapNames[] = {"auroc_gap", "parity_gap", "recall_gap",
                                            "specificity_gap"};
const Gap& GapByName(const FairnessReport& report, std::string_view name);

struct GapSummary {
  std::string name;
  MeanStd stats;             // over defined entries only
  std::size_t skipped = 0;   // undefined entries
};

// Mean and standard deviation of each gap across reports (e.g. years).
std::vector<GapSummary> SummarizeGaps(std::span<const FairnessReport> reports);

}  // namespace dptails

#endif  // DPTAILS_FAIRNESS_AUDIT_HPP_
