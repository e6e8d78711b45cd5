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
#include "dptails/influence.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "dptails/error.hpp"

namespace dptails {

double DefaultDamping(const ModelParams& params) {
  return params.l2_lambda == 0.0 ? kDefaultInfluenceDamping : 0.0;
}

InfluenceEngine::InfluenceEngine(const ModelParams& params, const Eigen::MatrixXd& hessian_data,
                                 std::optional<double> damping, HessianSolver solver)
    : params_(params), damping_(damping.value_or(DefaultDamping(params))), solver_(solver) {
  Require(params.family == ModelFamily::kLogisticBinary, ErrorCode::kUnsupportedFamily,
          "influence functions are only valid for lr-binary models");
  hessian_ = LrHessian(params, hessian_data, damping_);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hessian_, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  Require(lo > 1e-12 * std::max(hi, 1.0), ErrorCode::kConditioning,
          "Hessian is numerically singular (min eigenvalue " + std::to_string(lo) +
              "); add damping or regularization");
  llt_.compute(hessian_);
  Require(llt_.info() == Eigen::Success, ErrorCode::kConditioning, "Cholesky factorization failed");
}

Eigen::VectorXd InfluenceEngine::Solve(const Eigen::VectorXd& v) const {
  if (solver_ == HessianSolver::kDense) {
    last_residual_ = 0.0;
    return llt_.solve(v);
  }
  // Conjugate gradient to relative residual 1e-10.
  const double target = 1e-10 * v.norm();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(v.size());
  Eigen::VectorXd r = v;
  Eigen::VectorXd p = r;
  double rr = r.squaredNorm();
  const Eigen::Index max_iter = 50 * v.size() + 100;
  for (Eigen::Index it = 0; it < max_iter && std::sqrt(rr) > target; ++it) {
    const Eigen::VectorXd hp = hessian_ * p;
    const double alpha = rr / p.dot(hp);
    x += alpha * p;
    r -= alpha * hp;
    const double rr_next = r.squaredNorm();
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  last_residual_ = v.norm() > 0.0 ? (v - hessian_ * x).norm() / v.norm() : 0.0;
  Require(last_residual_ <= 1e-10 || v.norm() == 0.0, ErrorCode::kConditioning,
          "conjugate gradient did not reach relative residual 1e-10");
  return x;
}

double InfluenceEngine::Pair(const Eigen::VectorXd& x_train, int y_train,
                             const Eigen::VectorXd& x_test, int y_test) const {
  const Eigen::VectorXd g_train = RecordLossGradient(params_, x_train, y_train);
  const Eigen::VectorXd solved = Solve(RecordLossGradient(params_, x_test, y_test));
  return -g_train.dot(solved);
}

double InfluencePair(const ModelParams& params, const Eigen::MatrixXd& hessian_data,
                     const Eigen::VectorXd& x_train, int y_train, const Eigen::VectorXd& x_test,
                     int y_test, std::optional<double> damping, HessianSolver solver) {
  return InfluenceEngine(params, hessian_data, damping, solver).Pair(x_train, y_train, x_test, y_test);
}

InfluenceMatrix InfluenceMatrix::SelectTestColumns(const std::vector<std::size_t>& columns) const {
  InfluenceMatrix out;
  out.train_ids = train_ids;
  out.train_labels = train_labels;
  out.train_groups = train_groups;
  out.model_fingerprint = model_fingerprint;
  out.damping = damping;
  out.values.resize(values.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const std::size_t j = columns[c];
    Require(j < test_ids.size(), ErrorCode::kShape, "test column out of range");
    out.values.col(static_cast<Eigen::Index>(c)) = values.col(static_cast<Eigen::Index>(j));
    out.test_ids.push_back(test_ids[j]);
    out.test_labels.push_back(test_labels[j]);
    out.test_groups.push_back(test_groups[j]);
  }
  return out;
}

std::string ModelFingerprint(const ModelParams& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  const int header[3] = {static_cast<int>(params.family), params.input_dim, params.num_classes};
  feed(header, sizeof(header));
  feed(&params.l2_lambda, sizeof(double));
  feed(params.theta.data(), static_cast<std::size_t>(params.theta.size()) * sizeof(double));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

InfluenceMatrix ComputeInfluenceMatrix(const InfluenceEngine& engine, const Cohort& train_subset,
                                       const Cohort& test_subset) {
  const ModelParams& params = engine.params();
  InfluenceMatrix out;
  out.damping = engine.damping();
  out.model_fingerprint = ModelFingerprint(params);
  out.train_ids = train_subset.ids;
  out.train_labels = train_subset.labels;
  out.train_groups = train_subset.groups;
  out.test_ids = test_subset.ids;
  out.test_labels = test_subset.labels;
  out.test_groups = test_subset.groups;

  const auto n_train = static_cast<Eigen::Index>(train_subset.size());
  const auto n_test = static_cast<Eigen::Index>(test_subset.size());
  std::vector<Eigen::VectorXd> train_grads(static_cast<std::size_t>(n_train));
  for (Eigen::Index i = 0; i < n_train; ++i) {
    train_grads[static_cast<std::size_t>(i)] = RecordLossGradient(
        params, train_subset.features.row(i).transpose(), train_subset.labels[static_cast<std::size_t>(i)]);
  }
  out.values.resize(n_train, n_test);
  for (Eigen::Index j = 0; j < n_test; ++j) {
    // Same arithmetic as InfluenceEngine::Pair, so entries match it exactly.
    const Eigen::VectorXd solved = engine.Solve(RecordLossGradient(
        params, test_subset.features.row(j).transpose(), test_subset.labels[static_cast<std::size_t>(j)]));
    for (Eigen::Index i = 0; i < n_train; ++i) {
      out.values(i, j) = -train_grads[static_cast<std::size_t>(i)].dot(solved);
    }
  }
  return out;
}

std::map<std::int64_t, int> AssignByLabel(const InfluenceMatrix& matrix) {
  std::map<std::int64_t, int> out;
  for (std::size_t i = 0; i < matrix.train_ids.size(); ++i) {
    out[matrix.train_ids[i]] = matrix.train_labels[i];
  }
  return out;
}

std::map<std::int64_t, int> AssignByGroup(const InfluenceMatrix& matrix) {
  std::map<std::int64_t, int> out;
  for (std::size_t i = 0; i < matrix.train_ids.size(); ++i) {
    out[matrix.train_ids[i]] = matrix.train_groups[i];
  }
  return out;
}

GroupInfluenceSummary GroupInfluence(const InfluenceMatrix& matrix,
                                     const std::map<std::int64_t, int>& assignment) {
  std::vector<int> row_group(matrix.train_ids.size());
  std::set<int> group_set;
  for (std::size_t i = 0; i < matrix.train_ids.size(); ++i) {
    const auto it = assignment.find(matrix.train_ids[i]);
    Require(it != assignment.end(), ErrorCode::kAssignment,
            "train id " + std::to_string(matrix.train_ids[i]) + " has no group");
    row_group[i] = it->second;
    group_set.insert(it->second);
  }
  GroupInfluenceSummary out;
  out.groups.assign(group_set.begin(), group_set.end());
  const auto n_groups = static_cast<Eigen::Index>(out.groups.size());
  out.group_values = Eigen::MatrixXd::Zero(n_groups, matrix.values.cols());
  for (std::size_t i = 0; i < row_group.size(); ++i) {
    const auto g = static_cast<Eigen::Index>(
        std::lower_bound(out.groups.begin(), out.groups.end(), row_group[i]) - out.groups.begin());
    out.group_values.row(g) += matrix.values.row(static_cast<Eigen::Index>(i));
  }
  for (Eigen::Index g = 0; g < n_groups; ++g) {
    std::vector<double> values(out.group_values.row(g).begin(), out.group_values.row(g).end());
    out.per_group.push_back(ComputeMeanStd(values));
  }
  if (n_groups > 0) {
    std::size_t helpful = 0, harmful = 0;
    for (std::size_t g = 1; g < out.per_group.size(); ++g) {
      if (out.per_group[g].mean < out.per_group[helpful].mean) helpful = g;
      if (out.per_group[g].mean > out.per_group[harmful].mean) harmful = g;
    }
    out.most_helpful_group = out.groups[helpful];
    out.most_harmful_group = out.groups[harmful];
  }
  return out;
}

std::vector<std::size_t> TopVarianceTestPoints(const InfluenceMatrix& matrix, std::size_t k) {
  const Eigen::Index cols = matrix.values.cols();
  std::vector<double> variance(static_cast<std::size_t>(cols), 0.0);
  for (Eigen::Index j = 0; j < cols; ++j) {
    const auto col = matrix.values.col(j);
    const double mean = col.mean();
    variance[static_cast<std::size_t>(j)] = (col.array() - mean).square().mean();
  }
  std::vector<std::size_t> order(static_cast<std::size_t>(cols));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (variance[a] != variance[b]) return variance[a] > variance[b];
    return matrix.test_ids[a] < matrix.test_ids[b];
  });
  order.resize(std::min(k, order.size()));
  return order;
}

InfluencerFrequencyTable InfluencerFrequency(const InfluenceMatrix& matrix,
                                             InfluenceDirection direction) {
  Require(matrix.values.rows() > 0 && matrix.values.cols() > 0, ErrorCode::kDomain,
          "influencer frequency needs a non-empty matrix");
  std::map<std::int64_t, std::int64_t> tally;
  for (Eigen::Index j = 0; j < matrix.values.cols(); ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < matrix.values.rows(); ++i) {
      const double v = matrix.values(i, j);
      const double b = matrix.values(best, j);
      if (direction == InfluenceDirection::kHelpful ? v < b : v > b) best = i;
    }
    ++tally[matrix.train_ids[static_cast<std::size_t>(best)]];
  }
  InfluencerFrequencyTable out;
  out.direction = direction;
  out.test_points = static_cast<std::size_t>(matrix.values.cols());
  out.counts.assign(tally.begin(), tally.end());
  std::stable_sort(out.counts.begin(), out.counts.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  out.concentration = static_cast<double>(out.counts.front().second) /
                      static_cast<double>(out.test_points);
  return out;
}

double MaxAbsInfluence(const InfluenceMatrix& matrix) {
  return matrix.values.size() == 0 ? 0.0 : matrix.values.cwiseAbs().maxCoeff();
}

double MeanColumnVariance(const InfluenceMatrix& matrix) {
  const Eigen::Index cols = matrix.values.cols();
  if (cols == 0) return 0.0;
  double total = 0.0;
  for (Eigen::Index j = 0; j < cols; ++j) {
    const auto col = matrix.values.col(j);
    total += (col.array() - col.mean()).square().mean();
  }
  return total / static_cast<double>(cols);
}

std::string InfluenceMatrixToCsv(const InfluenceMatrix& matrix) {
  std::ostringstream out;
  out << "train_id";
  for (std::int64_t id : matrix.test_ids) out << ',' << id;
  out << '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < matrix.values.rows(); ++i) {
    out << matrix.train_ids[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < matrix.values.cols(); ++j) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), matrix.values(i, j),
                                     std::chars_format::general, 17);
      out << ',' << std::string_view(buf, static_cast<std::size_t>(end - buf));
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace dptails
