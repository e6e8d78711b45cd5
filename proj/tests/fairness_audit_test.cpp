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

#include <gtest/gtest.h>

#include "dptails/random.hpp"
#include "test_util.hpp"

namespace dptails {
namespace {

struct Records {
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<int> groups;

  void Add(int group, int label, bool predicted_positive, int count) {
    for (int i = 0; i < count; ++i) {
      // Distinct scores on each side of 0.5 keep AUROC informative.
      scores.push_back(predicted_positive ? 0.6 + 0.01 * i : 0.4 - 0.01 * i);
      labels.push_back(label);
      groups.push_back(group);
    }
  }
};

// Group 1: tp 4, fp 1, fn 1, tn 4. Group 2: tp 2, fp 2, fn 2, tn 4.
Records WorkedExample() {
  Records r;
  r.Add(1, 1, true, 4);
  r.Add(1, 0, true, 1);
  r.Add(1, 1, false, 1);
  r.Add(1, 0, false, 4);
  r.Add(2, 1, true, 2);
  r.Add(2, 0, true, 2);
  r.Add(2, 1, false, 2);
  r.Add(2, 0, false, 4);
  return r;
}

TEST(FairnessGapsTest, WorkedConfusionExample) {
  const Records r = WorkedExample();
  const FairnessReport f = FairnessGaps(r.scores, r.labels, r.groups, 1, 2);
  EXPECT_EQ(f.confusion_1, (ConfusionMatrix{4, 1, 4, 1}));
  EXPECT_EQ(f.confusion_2, (ConfusionMatrix{2, 2, 4, 2}));
  // parity 5/10 - 4/10, recall 4/5 - 2/4, specificity 4/5 - 4/6.
  EXPECT_NEAR(*f.parity_gap.value, 0.1, 1e-12);
  EXPECT_NEAR(*f.recall_gap.value, 0.3, 1e-12);
  EXPECT_NEAR(*f.specificity_gap.value, 2.0 / 15.0, 1e-12);
  ASSERT_TRUE(f.auroc_gap.defined());
}

TEST(FairnessGapsTest, AntisymmetricAndZeroOnIdentical) {
  Rng rng(1);
  Records r;
  for (int i = 0; i < 400; ++i) {
    r.scores.push_back(rng.Uniform());
    r.labels.push_back(rng.Uniform() < 0.3 ? 1 : 0);
    r.groups.push_back(static_cast<int>(rng.UniformInt(3)));
  }
  const FairnessReport ab = FairnessGaps(r.scores, r.labels, r.groups, 0, 2, 0.4);
  const FairnessReport ba = FairnessGaps(r.scores, r.labels, r.groups, 2, 0, 0.4);
  for (const char* name : kGapNames) {
    EXPECT_EQ(*GapByName(ab, name).value, -*GapByName(ba, name).value) << name;
  }
  const FairnessReport same = FairnessGaps(r.scores, r.labels, r.groups, 1, 1, 0.4);
  for (const char* name : kGapNames) EXPECT_EQ(*GapByName(same, name).value, 0.0) << name;
}

TEST(FairnessGapsTest, UndefinedGapsCarryReasons) {
  Records r;
  r.Add(0, 1, true, 3);
  r.Add(0, 0, false, 3);
  r.Add(1, 0, true, 2);
  r.Add(1, 0, false, 2);  // no positives in group 1
  const FairnessReport f = FairnessGaps(r.scores, r.labels, r.groups, 0, 1);
  EXPECT_FALSE(f.recall_gap.defined());
  EXPECT_FALSE(f.recall_gap.undefined_reason.empty());
  EXPECT_FALSE(f.auroc_gap.defined());
  EXPECT_TRUE(f.parity_gap.defined());
  EXPECT_TRUE(f.specificity_gap.defined());
}

TEST(FairnessGapsTest, EmptyGroupIsDomainError) {
  const Records r = WorkedExample();
  try {
    FairnessGaps(r.scores, r.labels, r.groups, 1, 7);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDomain);
    EXPECT_NE(std::string(e.what()).find("7"), std::string::npos);
  }
}

TEST(SummarizeGapsTest, SkipsUndefinedEntries) {
  const Records good = WorkedExample();
  Records bad;
  bad.Add(1, 1, true, 2);
  bad.Add(1, 0, false, 2);
  bad.Add(2, 0, true, 2);
  std::vector<FairnessReport> reports = {FairnessGaps(good.scores, good.labels, good.groups, 1, 2),
                                         FairnessGaps(good.scores, good.labels, good.groups, 1, 2),
                                         FairnessGaps(bad.scores, bad.labels, bad.groups, 1, 2)};
  const std::vector<GapSummary> summary = SummarizeGaps(reports);
  ASSERT_EQ(summary.size(), 4u);
  EXPECT_EQ(summary[2].name, "recall_gap");
  EXPECT_EQ(summary[2].skipped, 1u);
  EXPECT_NEAR(summary[2].stats.mean, 0.3, 1e-12);
  EXPECT_EQ(summary[1].skipped, 0u);
}

}  // namespace
}  // namespace dptails
