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
#include "dptails/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "dptails/metrics.hpp"
#include "dptails/random.hpp"
#include "test_util.hpp"

namespace dptails {
namespace {

std::int64_t CountLabel(const Cohort& c, int label) {
  return std::count(c.labels.begin(), c.labels.end(), label);
}

TEST(RngTest, DeriveSeedIsStableAndSensitive) {
  EXPECT_EQ(DeriveSeed(1, {"a", 2}), DeriveSeed(1, {"a", 2}));
  EXPECT_NE(DeriveSeed(1, {"a", 2}), DeriveSeed(1, {"a", 3}));
  EXPECT_NE(DeriveSeed(1, {"a", 2}), DeriveSeed(2, {"a", 2}));
  EXPECT_NE(DeriveSeed(1, {"ab"}), DeriveSeed(1, {"a", "b"}));
}

TEST(RngTest, PermutationIsAPermutation) {
  Rng rng(4);
  std::vector<std::size_t> p = rng.Permutation(100);
  std::sort(p.begin(), p.end());
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i], i);
}

TEST(RngTest, NormalMoments) {
  Rng rng(8);
  double s = 0.0, ss = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.Normal();
    s += z;
    ss += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(ss / n, 1.0, 0.01);
}

TEST(GenerateCohortTest, BalancedCount) {
  CohortConfig c;
  c.seed = 7;
  const Cohort cohort = GenerateCohort(c);
  EXPECT_EQ(cohort.size(), 1000u);
  const auto pos = CountLabel(cohort, 1);
  EXPECT_GE(pos, 450);
  EXPECT_LE(pos, 550);
}

TEST(GenerateCohortTest, Deterministic) {
  CohortConfig c;
  c.seed = 7;
  c.first_year = 2001;
  c.last_year = 2004;
  c.yearly_drift = 0.3;
  EXPECT_TRUE(GenerateCohort(c) == GenerateCohort(c));
  EXPECT_EQ(CohortToCsv(GenerateCohort(c)), CohortToCsv(GenerateCohort(c)));
  CohortConfig other = c;
  other.seed = 8;
  EXPECT_FALSE(GenerateCohort(c) == GenerateCohort(other));
}

TEST(GenerateCohortTest, TailCountWithinThreeSigma) {
  CohortConfig c;
  c.n = 20000;
  c.positive_prevalence = {0.02};
  c.seed = 3;
  const auto pos = CountLabel(GenerateCohort(c), 1);
  EXPECT_GE(pos, 311);
  EXPECT_LE(pos, 489);
}

TEST(GenerateCohortTest, MulticlassPrevalences) {
  CohortConfig c;
  c.n = 20000;
  c.num_classes = 3;
  c.positive_prevalence = {0.2, 0.05};
  c.seed = 5;
  const Cohort cohort = GenerateCohort(c);
  const std::vector<double> p = c.ClassPrevalences();
  ASSERT_EQ(p.size(), 3u);
  for (int k = 0; k < 3; ++k) {
    const double expected = 20000.0 * p[static_cast<std::size_t>(k)];
    const double sd = std::sqrt(expected * (1.0 - p[static_cast<std::size_t>(k)]));
    EXPECT_NEAR(static_cast<double>(CountLabel(cohort, k)), expected, 3.0 * sd);
  }
}

TEST(GenerateCohortTest, StandardizedColumns) {
  CohortConfig c;
  c.n = 5000;
  c.d = 6;
  c.first_year = 2001;
  c.last_year = 2010;
  c.yearly_drift = 0.5;
  c.transition_year = 2006;
  c.transition_shift = 3.0;
  c.seed = 2;
  const Cohort cohort = GenerateCohort(c);
  for (Eigen::Index j = 0; j < cohort.dim(); ++j) {
    const auto col = cohort.features.col(j);
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().sum() / (col.size() - 1));
    EXPECT_NEAR(mean, 0.0, 0.1);
    EXPECT_NEAR(sd, 1.0, 0.1);
  }
  const std::vector<int> years = cohort.DistinctYears();
  EXPECT_EQ(years.front(), 2001);
  EXPECT_EQ(years.back(), 2010);
}

TEST(GenerateCohortTest, DriftMonotonicity) {
  CohortConfig c;
  c.d = 5;
  c.num_classes = 3;
  c.positive_prevalence = {0.2};
  c.first_year = 2001;
  c.last_year = 2012;
  c.yearly_drift = 0.4;
  c.transition_year = 2009;
  c.transition_shift = 2.5;
  const CohortModel model(c);
  for (int k = 0; k < 3; ++k) {
    for (int y = 2001; y < 2012; ++y) {
      const double step = (model.ClassMean(k, y + 1) - model.ClassMean(k, y)).norm();
      const double expected = y + 1 == 2009 ? 0.4 + 2.5 : 0.4;
      EXPECT_NEAR(step, expected, 1e-9) << "class " << k << " year " << y;
    }
  }
}

TEST(GenerateCohortTest, GroupLabelIndependence) {
  CohortConfig c;
  c.n = 20000;
  c.positive_prevalence = {0.3};
  c.group_prevalences = {0.7, 0.3};
  c.seed = 11;
  const Cohort cohort = GenerateCohort(c);
  std::vector<double> g(cohort.groups.begin(), cohort.groups.end());
  std::vector<double> y(cohort.labels.begin(), cohort.labels.end());
  EXPECT_NEAR(Pearson(g, y).statistic, 0.0, 0.03);
  c.group_label_association = 0.8;
  const Cohort coupled = GenerateCohort(c);
  std::vector<double> g2(coupled.groups.begin(), coupled.groups.end());
  std::vector<double> y2(coupled.labels.begin(), coupled.labels.end());
  EXPECT_GT(Pearson(g2, y2).statistic, 0.5);
}

TEST(GenerateCohortTest, ConfigErrorsNameTheField) {
  CohortConfig c;
  c.positive_prevalence = {1.2};
  try {
    GenerateCohort(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
    EXPECT_NE(std::string(e.what()).find("positive_prevalence"), std::string::npos);
  }
  CohortConfig years;
  years.first_year = 2005;
  years.last_year = 2004;
  try {
    GenerateCohort(years);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
    EXPECT_NE(std::string(e.what()).find("year"), std::string::npos);
  }
  CohortConfig drift;
  drift.yearly_drift = -1.0;
  EXPECT_EQ(CodeOf([&] { GenerateCohort(drift); }), ErrorCode::kConfig);
}

TEST(SplitYearlyTest, Cumulative) {
  CohortConfig c;
  c.first_year = 2001;
  c.last_year = 2003;
  c.seed = 1;
  const Cohort cohort = GenerateCohort(c);
  const CohortSplit split = SplitYearly(cohort, 2003);
  EXPECT_EQ(split.train.DistinctYears(), (std::vector<int>{2001, 2002}));
  EXPECT_EQ(split.test.DistinctYears(), (std::vector<int>{2003}));
  EXPECT_EQ(split.train.size() + split.test.size(), cohort.size());
  EXPECT_TRUE(std::is_sorted(split.train.ids.begin(), split.train.ids.end()));
}

TEST(SplitYearlyTest, SingleYearDisjointHalves) {
  CohortConfig c;
  c.first_year = 2006;
  c.last_year = 2007;
  c.seed = 1;
  const Cohort cohort = GenerateCohort(c);
  const CohortSplit split = SplitYearly(cohort, 2006, SplitProtocol::kSingleYear);
  EXPECT_EQ(split.train.DistinctYears(), (std::vector<int>{2006}));
  EXPECT_EQ(split.test.DistinctYears(), (std::vector<int>{2006}));
  std::set<std::int64_t> train_ids(split.train.ids.begin(), split.train.ids.end());
  for (std::int64_t id : split.test.ids) EXPECT_EQ(train_ids.count(id), 0u);
  const auto in_year = cohort.YearRange(2006, 2006).size();
  EXPECT_EQ(split.train.size() + split.test.size(), in_year);
}

TEST(SplitYearlyTest, TrainFractionAndErrors) {
  CohortConfig c;
  c.first_year = 2001;
  c.last_year = 2004;
  c.seed = 9;
  const Cohort cohort = GenerateCohort(c);
  const CohortSplit split = SplitYearly(cohort, 2004);
  // 1000 * 3/4 +- 3 sqrt(1000 * 3/16).
  EXPECT_NEAR(static_cast<double>(split.train.size()), 750.0, 3.0 * std::sqrt(187.5));
  EXPECT_EQ(CodeOf([&] { SplitYearly(cohort, 2001); }), ErrorCode::kSplit);
  EXPECT_EQ(CodeOf([&] { SplitYearly(cohort, 1999); }), ErrorCode::kSplit);
}

TEST(CohortCsvTest, RoundTrip) {
  CohortConfig c;
  c.n = 200;
  c.d = 3;
  c.group_prevalences = {0.5, 0.5};
  c.first_year = 2001;
  c.last_year = 2003;
  c.seed = 4;
  const Cohort cohort = GenerateCohort(c);
  const Cohort back = ParseCohortCsv(CohortToCsv(cohort), 2, 2);
  EXPECT_TRUE(back == cohort);
  EXPECT_EQ(back.features, cohort.features);
}

TEST(CohortCsvTest, LabelOutOfRange) {
  const std::string text = "id,year,group,label,f0\n0,2001,0,1,0.5\n1,2001,0,2,0.1\n";
  try {
    ParseCohortCsv(text, 2, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
  }
}

TEST(CohortCsvTest, SchemaViolations) {
  EXPECT_EQ(CodeOf([] { ParseCohortCsv("id,year,label,f0\n"); }), ErrorCode::kParse);
  EXPECT_EQ(CodeOf([] { ParseCohortCsv("id,year,group,label,f0\n0,2001,0,1,abc\n"); }),
            ErrorCode::kParse);
  EXPECT_EQ(CodeOf([] { ParseCohortCsv("id,year,group,label,f0\n0,2001,0,1\n"); }),
            ErrorCode::kParse);
}

TEST(CohortCsvTest, HeaderOnlyIsEmpty) {
  const Cohort empty = ParseCohortCsv("id,year,group,label,f0,f1\n");
  EXPECT_EQ(empty.size(), 0u);
  EXPECT_EQ(empty.dim(), 2);
  EXPECT_NO_THROW(empty.Validate());
}

}  // namespace
}  // namespace dptails
