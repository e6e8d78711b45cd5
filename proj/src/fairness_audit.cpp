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
#include "dptails/fairness_audit.hpp"

#include <algorithm>

#include "dptails/error.hpp"

namespace dptails {

namespace {

Gap RateGap(std::int64_t num_1, std::int64_t den_1, std::int64_t num_2, std::int64_t den_2,
            const std::string& what) {
  Gap gap;
  if (den_1 == 0 || den_2 == 0) {
    gap.undefined_reason = std::string("no ") + what + " in group " + (den_1 == 0 ? "1" : "2");
    return gap;
  }
  gap.value = static_cast<double>(num_1) / static_cast<double>(den_1) -
              static_cast<double>(num_2) / static_cast<double>(den_2);
  return gap;
}

}  // namespace

FairnessReport FairnessGaps(std::span<const double> scores, std::span<const int> labels,
                            std::span<const int> groups, int group_1, int group_2,
                            double threshold) {
  Require(scores.size() == labels.size() && labels.size() == groups.size(), ErrorCode::kShape,
          "scores, labels and groups differ in length");
  std::vector<double> s1, s2;
  std::vector<int> y1, y2;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (groups[i] == group_1) {
      s1.push_back(scores[i]);
      y1.push_back(labels[i]);
    }
    if (groups[i] == group_2) {
      s2.push_back(scores[i]);
      y2.push_back(labels[i]);
    }
  }
  Require(!s1.empty(), ErrorCode::kDomain, "group " + std::to_string(group_1) + " is empty");
  Require(!s2.empty(), ErrorCode::kDomain, "group " + std::to_string(group_2) + " is empty");

  FairnessReport r;
  r.group_1 = group_1;
  r.group_2 = group_2;
  r.threshold = threshold;
  r.confusion_1 = Confusion(s1, y1, threshold);
  r.confusion_2 = Confusion(s2, y2, threshold);
  const ConfusionMatrix& a = r.confusion_1;
  const ConfusionMatrix& b = r.confusion_2;
  r.parity_gap = RateGap(a.tp + a.fp, a.n(), b.tp + b.fp, b.n(), "records");
  r.recall_gap = RateGap(a.tp, a.tp + a.fn, b.tp, b.tp + b.fn, "positives");
  r.specificity_gap = RateGap(a.tn, a.tn + a.fp, b.tn, b.tn + b.fp, "negatives");

  auto both_classes = [](const ConfusionMatrix& cm) {
    return cm.tp + cm.fn > 0 && cm.tn + cm.fp > 0;
  };
  if (both_classes(a)) r.auroc_1 = Auroc(s1, y1);
  if (both_classes(b)) r.auroc_2 = Auroc(s2, y2);
  if (r.auroc_1 && r.auroc_2) {
    r.auroc_gap.value = *r.auroc_1 - *r.auroc_2;
  } else {
    r.auroc_gap.undefined_reason =
        std::string("AUROC undefined in group ") + (r.auroc_1 ? "2" : "1") + " (single class)";
  }
  return r;
}

const Gap& GapByName(const FairnessReport& report, std::string_view name) {
  if (name == "auroc_gap") return report.auroc_gap;
  if (name == "parity_gap") return report.parity_gap;
  if (name == "recall_gap") return report.recall_gap;
  if (name == "specificity_gap") return report.specificity_gap;
  Fail(ErrorCode::kDomain, "unknown gap '" + std::string(name) + "'");
}

std::vector<GapSummary> SummarizeGaps(std::span<const FairnessReport> reports) {
  std::vector<GapSummary> out;
  for (const char* name : kGapNames) {
    GapSummary summary;
    summary.name = name;
    std::vector<double> values;
    for (const FairnessReport& r : reports) {
      const Gap& gap = GapByName(r, name);
      if (gap.defined()) {
        values.push_back(*gap.value);
      } else {
        ++summary.skipped;
      }
    }
    summary.stats = ComputeMeanStd(values);
    out.push_back(summary);
  }
  return out;
}

}  // namespace dptails
