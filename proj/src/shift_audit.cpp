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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dptails/error.hpp"
#include "dptails/random.hpp"

namespace dptails {

namespace {

// Seeded choice of `count` positions out of [0, n), kept in ascending order.
std::vector<std::size_t> Downsample(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<std::size_t> perm = rng.Permutation(n);
  perm.resize(count);
  std::sort(perm.begin(), perm.end());
  return perm;
}

std::string Number(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, end);
}

}  // namespace

DomainAudit DomainClassifierSignificance(const Cohort& train, const Cohort& test,
                                         const DomainModelSpec& spec, std::uint64_t seed,
                                         int year) {
  Require(train.size() >= kMinShiftSide && test.size() >= kMinShiftSide,
          ErrorCode::kInsufficientData,
          "domain classifier needs >= 10 records per side (got " + std::to_string(train.size()) +
              " and " + std::to_string(test.size()) + ")");
  Require(train.dim() == test.dim(), ErrorCode::kShape, "cohorts differ in feature dimension");
  Require(spec.fit_fraction > 0.0 && spec.fit_fraction < 1.0, ErrorCode::kConfig,
          "fit_fraction: must lie in (0, 1)");

  Rng rng(DeriveSeed(seed, {"domain-classifier", static_cast<std::int64_t>(year)}));
  const std::size_t m = std::min(train.size(), test.size());
  const std::size_t fit_per_side = static_cast<std::size_t>(
      std::llround(spec.fit_fraction * static_cast<double>(m)));
  Require(fit_per_side >= 1 && fit_per_side < m, ErrorCode::kInsufficientData,
          "fit/eval split leaves an empty partition");

  // Balance by downsampling, then shuffle each side before the stratified split.
  const Cohort* sides[2] = {&train, &test};
  std::vector<std::size_t> fit_rows[2], eval_rows[2];
  for (int s = 0; s < 2; ++s) {
    std::vector<std::size_t> chosen = Downsample(sides[s]->size(), m, rng);
    const std::vector<std::size_t> order = rng.Permutation(m);
    for (std::size_t k = 0; k < m; ++k) {
      (k < fit_per_side ? fit_rows[s] : eval_rows[s]).push_back(chosen[order[k]]);
    }
  }

  auto assemble = [&](std::vector<std::size_t>* rows, Eigen::MatrixXd& x, std::vector<int>& y) {
    const std::size_t total = rows[0].size() + rows[1].size();
    x.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(train.dim()));
    y.clear();
    Eigen::Index r = 0;
    for (int s = 0; s < 2; ++s) {
      for (std::size_t i : rows[s]) {
        x.row(r++) = sides[s]->features.row(static_cast<Eigen::Index>(i));
        y.push_back(s);
      }
    }
  };
  Eigen::MatrixXd x_fit, x_eval;
  std::vector<int> y_fit, y_eval;
  assemble(fit_rows, x_fit, y_fit);
  assemble(eval_rows, x_eval, y_eval);

  DomainAudit out;
  if (spec.kind == DomainModelKind::kConstant) {
    out.domain_model = ModelParams::Zeros(ModelFamily::kLogisticBinary,
                                          static_cast<int>(train.dim()), 2, 0, 0.0);
    out.report.notes.push_back("constant domain model");
  } else {
    out.domain_model = FitRidgeLogistic(x_fit, y_fit, spec.l2_lambda);
  }

  // Strict > 1/2 so a constant model scores exactly chance on balanced eval.
  const Eigen::VectorXd p = PositiveScores(out.domain_model, x_eval);
  std::int64_t correct = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const int predicted = p(i) > 0.5 ? 1 : 0;
    if (predicted == y_eval[static_cast<std::size_t>(i)]) ++correct;
  }
  ShiftReport& r = out.report;
  r.year = year;
  r.n_eval = static_cast<std::int64_t>(y_eval.size());
  r.domain_accuracy = static_cast<double>(correct) / static_cast<double>(r.n_eval);
  r.p_value = BinomialTest(correct, r.n_eval, 0.5).p_value;
  r.significant = r.p_value < kShiftAlpha;
  r.notes.push_back("balanced mixture of " + std::to_string(m) + " per side; " +
                    std::to_string(fit_per_side) + " per side fit, " +
                    std::to_string(m - fit_per_side) + " per side eval");
  return out;
}

double ShiftMalignancy(ShiftReport& report, const Cohort& test, const ModelParams& domain_model,
                       const TrainedModel& task_model) {
  Require(report.significant, ErrorCode::kProcedureOrder,
          "malignancy is only defined for a significant shift (p = " +
              std::to_string(report.p_value) + ")");
  Require(!test.empty(), ErrorCode::kDomain, "test cohort is empty");
  const Eigen::VectorXd origin = PositiveScores(domain_model, test.features);
  std::vector<std::size_t> order(test.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double pa = origin(static_cast<Eigen::Index>(a));
    const double pb = origin(static_cast<Eigen::Index>(b));
    if (pa != pb) return pa > pb;
    return test.ids[a] < test.ids[b];
  });
  order.resize(std::min(kMalignancyTopK, order.size()));
  const Cohort top = test.Subset(order);
  const Eigen::VectorXd scores = ModelScores(task_model, top.features);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < top.size(); ++i) {
    const int predicted = scores(static_cast<Eigen::Index>(i)) >= 0.5 ? 1 : 0;
    if (predicted == top.labels[i]) ++correct;
  }
  const double accuracy = static_cast<double>(correct) / static_cast<double>(top.size());
  report.malignancy_accuracy = accuracy;
  return accuracy;
}

RobustnessCorrelation CorrelateRobustness(std::span<const double> generalization_gaps,
                                          std::span<const double> malignancies) {
  RobustnessCorrelation out;
  out.test = Pearson(generalization_gaps, malignancies);
  if (out.test.statistic > 0.0) {
    out.interpretation = "positive correlation: lack of robustness";
  } else if (out.test.statistic < 0.0) {
    out.interpretation = "negative correlation: no evidence against robustness";
  } else {
    out.interpretation = "uncorrelated";
  }
  return out;
}

std::string ShiftReportsToCsv(std::span<const ShiftReport> reports) {
  std::ostringstream out;
  out << "year,malignancy,p_value,domain_accuracy,n_eval,significant\n";
  for (const ShiftReport& r : reports) {
    out << r.year << ',' << (r.malignancy_accuracy ? Number(*r.malignancy_accuracy) : "") << ','
        << Number(r.p_value) << ',' << Number(r.domain_accuracy) << ',' << r.n_eval << ','
        << (r.significant ? "true" : "false") << '\n';
  }
  return out.str();
}

}  // namespace dptails
