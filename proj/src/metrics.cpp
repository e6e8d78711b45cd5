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
#include "dptails/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "dptails/error.hpp"

namespace dptails {

namespace {

void CheckBinary(std::span<const double> scores, std::span<const int> labels) {
  Require(scores.size() == labels.size(), ErrorCode::kShape, "scores and labels differ in length");
  for (int y : labels) {
    Require(y == 0 || y == 1, ErrorCode::kDomain, "binary metrics need labels in {0, 1}");
  }
}

std::vector<std::size_t> OrderByScoreDescending(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

// Midranks (1-based) with ties averaged.
std::vector<double> Midranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double PearsonR(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  Require(sxx > 0.0 && syy > 0.0, ErrorCode::kUndefinedMetric,
          "correlation undefined for zero-variance input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace

double Auroc(std::span<const double> scores, std::span<const int> labels) {
  CheckBinary(scores, labels);
  const auto positives = std::count(labels.begin(), labels.end(), 1);
  const auto negatives = static_cast<std::int64_t>(labels.size()) - positives;
  Require(positives > 0 && negatives > 0, ErrorCode::kUndefinedMetric,
          "AUROC needs at least one positive and one negative label");
  // Mann-Whitney with midranks equals the tie-adjusted pair count.
  const std::vector<double> ranks = Midranks(scores);
  double positive_rank_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) positive_rank_sum += ranks[i];
  }
  const auto p = static_cast<double>(positives);
  const auto q = static_cast<double>(negatives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

double Auprc(std::span<const double> scores, std::span<const int> labels) {
  CheckBinary(scores, labels);
  const auto positives = std::count(labels.begin(), labels.end(), 1);
  Require(positives > 0, ErrorCode::kUndefinedMetric, "AUPRC needs at least one positive label");
  const std::vector<std::size_t> order = OrderByScoreDescending(scores);
  double ap = 0.0;
  double prev_recall = 0.0;
  std::int64_t tp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      tp += labels[order[j]];
      ++j;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    const double precision = static_cast<double>(tp) / static_cast<double>(j);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

namespace {

void FlattenOneVsRest(const Eigen::MatrixXd& scores, std::span<const int> labels,
                      std::vector<double>& flat_scores, std::vector<int>& flat_labels) {
  Require(static_cast<std::size_t>(scores.rows()) == labels.size(), ErrorCode::kShape,
          "score rows and labels differ in length");
  flat_scores.clear();
  flat_labels.clear();
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    Require(y >= 0 && y < scores.cols(), ErrorCode::kDomain, "label outside score columns");
    for (Eigen::Index c = 0; c < scores.cols(); ++c) {
      flat_scores.push_back(scores(i, c));
      flat_labels.push_back(y == c ? 1 : 0);
    }
  }
}

}  // namespace

double AurocMicro(const Eigen::MatrixXd& scores, std::span<const int> labels) {
  std::vector<double> s;
  std::vector<int> y;
  FlattenOneVsRest(scores, labels, s, y);
  return Auroc(s, y);
}

double AuprcMicro(const Eigen::MatrixXd& scores, std::span<const int> labels) {
  std::vector<double> s;
  std::vector<int> y;
  FlattenOneVsRest(scores, labels, s, y);
  return Auprc(s, y);
}

ConfusionMatrix Confusion(std::span<const double> scores, std::span<const int> labels,
                          double threshold) {
  CheckBinary(scores, labels);
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i] == 1) {
      (predicted ? cm.tp : cm.fn) += 1;
    } else {
      (predicted ? cm.fp : cm.tn) += 1;
    }
  }
  return cm;
}

TestResult BinomialTest(std::int64_t successes, std::int64_t trials, double p0) {
  Require(trials >= 1, ErrorCode::kDomain, "binomial test needs at least one trial");
  Require(successes >= 0 && successes <= trials, ErrorCode::kDomain,
          "successes must lie in [0, trials]");
  Require(p0 > 0.0 && p0 < 1.0, ErrorCode::kDomain, "null probability must lie in (0, 1)");
  const auto n = static_cast<double>(trials);
  const double log_p = std::log(p0);
  const double log_q = std::log1p(-p0);
  const double lg_n = std::lgamma(n + 1.0);
  auto log_pmf = [&](std::int64_t j) {
    const auto x = static_cast<double>(j);
    return lg_n - std::lgamma(x + 1.0) - std::lgamma(n - x + 1.0) + x * log_p + (n - x) * log_q;
  };
  const double threshold = log_pmf(successes) + std::log1p(1e-12);
  // Accumulate relative to the observed mass for range safety.
  const double anchor = log_pmf(successes);
  double total = 0.0;
  for (std::int64_t j = 0; j <= trials; ++j) {
    const double lp = log_pmf(j);
    if (lp <= threshold) total += std::exp(lp - anchor);
  }
  TestResult result;
  result.statistic = static_cast<double>(successes) / n;
  result.p_value = std::min(1.0, std::exp(anchor + std::log(total)));
  result.method = "exact two-sided binomial (probability mass)";
  return result;
}

TestResult Pearson(std::span<const double> x, std::span<const double> y) {
  Require(x.size() == y.size(), ErrorCode::kShape, "correlation inputs differ in length");
  Require(x.size() >= 3, ErrorCode::kDomain, "correlation needs at least 3 pairs");
  const double r = PearsonR(x, y);
  TestResult result;
  result.statistic = r;
  result.method = "pearson (t transform)";
  const double df = static_cast<double>(x.size()) - 2.0;
  if (std::abs(r) >= 1.0) {
    result.p_value = 0.0;
    return result;
  }
  const double t = r * std::sqrt(df / (1.0 - r * r));
  const boost::math::students_t dist(df);
  result.p_value = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
  return result;
}

double Spearman(std::span<const double> x, std::span<const double> y) {
  Require(x.size() == y.size(), ErrorCode::kShape, "correlation inputs differ in length");
  Require(x.size() >= 2, ErrorCode::kDomain, "rank correlation needs at least 2 pairs");
  const std::vector<double> rx = Midranks(x);
  const std::vector<double> ry = Midranks(y);
  return PearsonR(rx, ry);
}

MeanStd ComputeMeanStd(std::span<const double> values) {
  MeanStd out;
  out.count = values.size();
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return out;
}

}  // namespace dptails
