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
#include "dptails/shift_audit.hpp"

#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "dptails/random.hpp"
#include "test_util.hpp"

namespace dptails {
namespace {

// Two disjoint halves of one generated cohort: same distribution.
std::pair<Cohort, Cohort> SameDistribution(std::int64_t per_side, std::uint64_t seed) {
  CohortConfig c;
  c.n = 2 * per_side;
  c.d = 4;
  c.positive_prevalence = {0.3};
  c.seed = seed;
  const Cohort all = GenerateCohort(c);
  std::vector<std::size_t> even, odd;
  for (std::size_t i = 0; i < all.size(); ++i) (i % 2 == 0 ? even : odd).push_back(i);
  return {all.Subset(even), all.Subset(odd)};
}

void Translate(Cohort& c, const Eigen::VectorXd& v) { c.features.rowwise() += v.transpose(); }

TrainedModel TaskModel(const Cohort& train) {
  TrainedModel m;
  m.params = FitRidgeLogistic(train.features, train.labels, 1e-3);
  m.spend = PrivacySpend::NonPrivate();
  return m;
}

double Accuracy(const TrainedModel& m, const Cohort& c) {
  const Eigen::VectorXd s = ModelScores(m, c.features);
  int correct = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    correct += ((s(static_cast<Eigen::Index>(i)) >= 0.5 ? 1 : 0) == c.labels[i]) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(c.size());
}

TEST(DomainClassifierTest, CalibratedUnderNoShift) {
  int significant = 0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    const auto [p, q] = SameDistribution(300, 1000 + t);
    significant += DomainClassifierSignificance(p, q, {}, t).report.significant ? 1 : 0;
  }
  EXPECT_LE(significant, 10);
}

TEST(DomainClassifierTest, DetectsLargeShift) {
  auto [p, q] = SameDistribution(500, 3);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(4);
  v(0) = 5.0;
  Translate(q, v);
  const DomainAudit audit = DomainClassifierSignificance(p, q, {}, 1, 2009);
  EXPECT_GE(audit.report.domain_accuracy, 0.95);
  EXPECT_LT(audit.report.p_value, 1e-6);
  EXPECT_TRUE(audit.report.significant);
  EXPECT_EQ(audit.report.year, 2009);
  EXPECT_EQ(audit.report.n_eval, 2 * (500 - 350));
}

TEST(DomainClassifierTest, ConstantModelIsChance) {
  auto [p, q] = SameDistribution(200, 4);
  DomainModelSpec spec;
  spec.kind = DomainModelKind::kConstant;
  const DomainAudit audit = DomainClassifierSignificance(p, q, spec, 1);
  EXPECT_EQ(audit.report.domain_accuracy, 0.5);
  EXPECT_EQ(audit.report.p_value, 1.0);
  EXPECT_FALSE(audit.report.significant);
}

TEST(DomainClassifierTest, DeterministicAndBalanced) {
  auto [p, q] = SameDistribution(300, 5);
  std::vector<std::size_t> first(20);
  std::iota(first.begin(), first.end(), 0);
  const Cohort small_q = q.Subset(first);
  const DomainAudit a = DomainClassifierSignificance(p, small_q, {}, 9);
  const DomainAudit b = DomainClassifierSignificance(p, small_q, {}, 9);
  EXPECT_EQ(a.report.p_value, b.report.p_value);
  EXPECT_EQ(a.domain_model.theta, b.domain_model.theta);
  EXPECT_EQ(a.report.n_eval, 2 * (20 - 14));
}

TEST(DomainClassifierTest, InsufficientData) {
  auto [p, q] = SameDistribution(100, 6);
  const Cohort tiny = q.Subset(std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8});
  EXPECT_EQ(CodeOf([&] { DomainClassifierSignificance(p, tiny, {}, 1); }),
            ErrorCode::kInsufficientData);
}

TEST(DomainClassifierTest, PowerAtTwoUnits) {
  int detected = 0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    auto [p, q] = SameDistribution(1000, 2000 + t);
    Rng rng(t);
    Translate(q, 2.0 * rng.UnitVector(4));
    detected += DomainClassifierSignificance(p, q, {}, t).report.significant ? 1 : 0;
  }
  EXPECT_GE(detected, 95);
}

TEST(MalignancyTest, RequiresSignificance) {
  auto [p, q] = SameDistribution(200, 7);
  DomainAudit audit = DomainClassifierSignificance(p, q, {}, 1);
  audit.report.significant = false;
  EXPECT_EQ(CodeOf([&] { ShiftMalignancy(audit.report, q, audit.domain_model, TaskModel(p)); }),
            ErrorCode::kProcedureOrder);
}

TEST(MalignancyTest, IdentityShiftMatchesOverallAccuracy) {
  auto [p, q] = SameDistribution(1000, 8);
  DomainAudit audit = DomainClassifierSignificance(p, q, {}, 1);
  audit.report.significant = true;  // forced override
  const TrainedModel task = TaskModel(p);
  const double m = ShiftMalignancy(audit.report, q, audit.domain_model, task);
  EXPECT_NEAR(m, Accuracy(task, q), 0.1);
  EXPECT_EQ(*audit.report.malignancy_accuracy, m);
}

struct ShiftCase {
  TrainedModel task;
  double baseline = 0.0;
  Cohort p, q;
};

// q translated along `direction`; labels flipped with probability `flip`.
ShiftCase MakeShift(const Eigen::VectorXd& direction, double flip, std::uint64_t seed) {
  auto [p, q] = SameDistribution(1000, seed);
  ShiftCase out;
  out.task = TaskModel(p);
  out.baseline = Accuracy(out.task, q);
  Translate(q, direction);
  Rng rng(seed);
  for (int& y : q.labels) {
    if (rng.Uniform() < flip) y = 1 - y;
  }
  out.p = std::move(p);
  out.q = std::move(q);
  return out;
}

TEST(MalignancyTest, MalignantAndBenignShifts) {
  // Benign: translate orthogonally to the task's weight vector.
  auto [p0, q0] = SameDistribution(1000, 10);
  const Eigen::VectorXd w = TaskModel(p0).params.theta.head(4);
  Eigen::VectorXd ortho = Eigen::VectorXd::Zero(4);
  ortho(0) = 1.0;
  ortho -= ortho.dot(w) / w.squaredNorm() * w;
  ortho = 3.0 * ortho.normalized();

  ShiftCase benign = MakeShift(ortho, 0.0, 10);
  DomainAudit b = DomainClassifierSignificance(benign.p, benign.q, {}, 1);
  ASSERT_TRUE(b.report.significant);
  const double benign_m = ShiftMalignancy(b.report, benign.q, b.domain_model, benign.task);
  EXPECT_NEAR(benign_m, benign.baseline, 0.1);

  ShiftCase malignant = MakeShift(ortho, 1.0, 10);
  DomainAudit m = DomainClassifierSignificance(malignant.p, malignant.q, {}, 1);
  ASSERT_TRUE(m.report.significant);
  EXPECT_LT(ShiftMalignancy(m.report, malignant.q, m.domain_model, malignant.task), 0.5);
}

TEST(MalignancyTest, MonotoneInDisruption) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(4);
  v(1) = 3.0;
  double previous = 1.0;
  for (double flip : {0.0, 0.3, 0.6, 1.0}) {
    ShiftCase c = MakeShift(v, flip, 11);
    DomainAudit a = DomainClassifierSignificance(c.p, c.q, {}, 1);
    ASSERT_TRUE(a.report.significant);
    const double m = ShiftMalignancy(a.report, c.q, a.domain_model, c.task);
    EXPECT_LE(m, previous + 1e-12) << "flip " << flip;
    previous = m;
  }
}

TEST(RobustnessCorrelationTest, Examples) {
  const std::vector<double> malignancy = {0.9, 0.7, 0.8, 0.6, 0.75};
  std::vector<double> gaps;
  for (double m : malignancy) gaps.push_back(0.4 * (1.0 - m));
  EXPECT_NEAR(CorrelateRobustness(gaps, malignancy).test.statistic, -1.0, 1e-12);
  std::vector<double> rising;
  for (double m : malignancy) rising.push_back(2.0 * m + 1.0);
  const RobustnessCorrelation pos = CorrelateRobustness(rising, malignancy);
  EXPECT_NEAR(pos.test.statistic, 1.0, 1e-12);
  EXPECT_NE(pos.interpretation.find("lack of robustness"), std::string::npos);
  EXPECT_EQ(CodeOf([&] {
              CorrelateRobustness(std::vector<double>(5, 0.1), malignancy);
            }),
            ErrorCode::kUndefinedMetric);
}

TEST(RobustnessCorrelationTest, ElevenYearsMatchFormula) {
  Rng rng(12);
  std::vector<double> gaps(11), mal(11);
  for (int i = 0; i < 11; ++i) {
    mal[static_cast<std::size_t>(i)] = 0.5 + 0.4 * rng.Uniform();
    gaps[static_cast<std::size_t>(i)] = 0.1 * mal[static_cast<std::size_t>(i)] + 0.05 * rng.Normal();
  }
  const double mg = std::accumulate(gaps.begin(), gaps.end(), 0.0) / 11.0;
  const double mm = std::accumulate(mal.begin(), mal.end(), 0.0) / 11.0;
  double sgm = 0.0, sgg = 0.0, smm = 0.0;
  for (int i = 0; i < 11; ++i) {
    const double a = gaps[static_cast<std::size_t>(i)] - mg;
    const double b = mal[static_cast<std::size_t>(i)] - mm;
    sgm += a * b;
    sgg += a * a;
    smm += b * b;
  }
  const double r = sgm / std::sqrt(sgg * smm);
  const RobustnessCorrelation out = CorrelateRobustness(gaps, mal);
  EXPECT_NEAR(out.test.statistic, r, 1e-12);
  // The p-value only depends on the pairing, not the order of the years.
  EXPECT_GT(out.test.p_value, 0.0);
  EXPECT_LT(out.test.p_value, 1.0);
  EXPECT_NEAR(out.test.p_value,
              CorrelateRobustness(std::vector<double>(gaps.rbegin(), gaps.rend()),
                                  std::vector<double>(mal.rbegin(), mal.rend()))
                  .test.p_value,
              1e-12);
}

TEST(ShiftReportsCsvTest, Layout) {
  ShiftReport a;
  a.year = 2008;
  a.p_value = 0.5;
  a.domain_accuracy = 0.5;
  a.n_eval = 10;
  ShiftReport b = a;
  b.year = 2009;
  b.significant = true;
  b.malignancy_accuracy = 0.25;
  const std::vector<ShiftReport> reports = {a, b};
  EXPECT_EQ(ShiftReportsToCsv(reports),
            "year,malignancy,p_value,domain_accuracy,n_eval,significant\n"
            "2008,,0.5,0.5,10,false\n"
            "2009,0.25,0.5,0.5,10,true\n");
}

}  // namespace
}  // namespace dptails
