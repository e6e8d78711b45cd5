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
#ifndef DPTAILS_COHORT_HPP_
#define DPTAILS_COHORT_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace dptails {

// A labelled population: one row of `features` per record.
struct Cohort {
  Eigen::MatrixXd features;  // n x d, standardized
  std::vector<int> labels;   // in [0, num_classes)
  std::vector<int> groups;   // in [0, num_groups)
  std::vector<int> years;
  std::vector<std::int64_t> ids;
  int num_classes = 2;
  int num_groups = 1;

  std::size_t size() const { return labels.size(); }
  Eigen::Index dim() const { return features.cols(); }
  bool empty() const { return labels.empty(); }

  // Rows in the given order.
  Cohort Subset(std::span<const std::size_t> rows) const;
  // Records whose year satisfies lo <= year <= hi, order preserved.
  Cohort YearRange(int lo, int hi) const;
  std::vector<int> DistinctYears() const;

  // Throws kShape when vectors disagree in length or values leave their
  // declared ranges.
  void Validate() const;

  bool operator==(const Cohort& other) const;
};

Cohort Concatenate(const Cohort& a, const Cohort& b);

struct CohortConfig {
  std::int64_t n = 1000;
  int d = 4;
  int num_classes = 2;
  // Prevalence of classes 1..K-1; class 0 takes the remainder. A single
  // entry with K > 2 is broadcast to every non-zero class.
  std::vector<double> positive_prevalence = {0.5};
  // Distance between any two class-conditional means.
  double class_separation = 2.0;
  std::vector<double> group_prevalences = {1.0};
  // Probability that a record's group is tied to its label instead of drawn
  // from group_prevalences.
  double group_label_association = 0.0;
  int first_year = 2001;
  int last_year = 2001;
  double yearly_drift = 0.0;
  std::optional<int> transition_year;
  double transition_shift = 0.0;
  std::uint64_t seed = 0;

  // Full length-K class distribution.
  std::vector<double> ClassPrevalences() const;
  // Throws kConfig naming the offending field.
  void Validate() const;
};

// The generative geometry behind a config, in raw (pre-standardization)
// feature space.
class CohortModel {
 public:
  explicit CohortModel(const CohortConfig& config);

  // Cumulative displacement applied to every class in `year`.
  double YearOffset(int year) const;
  Eigen::VectorXd ClassMean(int label, int year) const;
  const Eigen::VectorXd& DriftDirection(int label) const { return drift_dirs_[label]; }

 private:
  CohortConfig config_;
  std::vector<Eigen::VectorXd> base_means_;
  std::vector<Eigen::VectorXd> drift_dirs_;
};

Cohort GenerateCohort(const CohortConfig& config);

enum class SplitProtocol { kCumulative, kSingleYear };

struct CohortSplit {
  Cohort train;
  Cohort test;
  SplitProtocol protocol = SplitProtocol::kCumulative;
  int pivot_year = 0;
};

// Cumulative: train on every year before the pivot, test on the pivot year.
// Single-year: alternating records of the pivot year go to train and test.
CohortSplit SplitYearly(const Cohort& cohort, int pivot_year,
                        SplitProtocol protocol = SplitProtocol::kCumulative);

std::string SplitProtocolName(SplitProtocol protocol);
SplitProtocol ParseSplitProtocol(const std::string& name);

// CSV with header id,year,group,label,f0,...,f{d-1}. Values are written with
// 17 significant digits, so a round trip is exact.
void WriteCohortCsv(const Cohort& cohort, const std::string& path);
std::string CohortToCsv(const Cohort& cohort);
// num_classes / num_groups bound the label and group columns; when absent
// they are inferred as max + 1.
Cohort ReadCohortCsv(const std::string& path, std::optional<int> num_classes = std::nullopt,
                     std::optional<int> num_groups = std::nullopt);
Cohort ParseCohortCsv(const std::string& text, std::optional<int> num_classes = std::nullopt,
                      std::optional<int> num_groups = std::nullopt);

}  // namespace dptails

#endif  // DPTAILS_COHORT_HPP_
