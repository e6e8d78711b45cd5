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
#include "dptails/accountant.hpp"

#include <algorithm>
#include <cmath>

#include "dptails/error.hpp"

namespace dptails {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double LogAdd(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// log(e^a - e^b), requires a >= b.
double LogSub(double a, double b) {
  if (b == kNegInf) return a;
  if (a <= b) return kNegInf;
  return a + std::log1p(-std::exp(b - a));
}

// log(erfc(x)) without underflow for large positive x.
double LogErfc(double x) {
  if (x < 25.0) return std::log(std::erfc(x));
  // Asymptotic expansion erfc(x) ~ e^{-x^2} / (x sqrt(pi)) * (1 - 1/(2x^2) + 3/(4x^4) - ...)
  const double inv2 = 1.0 / (x * x);
  const double series = 1.0 - 0.5 * inv2 + 0.75 * inv2 * inv2 - 1.875 * inv2 * inv2 * inv2;
  return -x * x - std::log(x) - 0.5 * std::log(M_PI) + std::log(series);
}

bool IsInteger(double v) { return v == std::floor(v); }

double LogMomentInteger(double q, double sigma, int order) {
  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  double log_a = kNegInf;
  for (int k = 0; k <= order; ++k) {
    const double log_binom = std::lgamma(order + 1.0) - std::lgamma(k + 1.0) -
                             std::lgamma(order - k + 1.0);
    const double term = log_binom + k * log_q + (order - k) * log_1mq +
                        (static_cast<double>(k) * k - k) / (2.0 * sigma * sigma);
    log_a = LogAdd(log_a, term);
  }
  return log_a;
}

double LogMomentFractional(double q, double sigma, double order) {
  double log_a0 = kNegInf;
  double log_a1 = kNegInf;
  const double z0 = sigma * sigma * std::log(1.0 / q - 1.0) + 0.5;
  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  const double lg_order = std::lgamma(order + 1.0);
  double sign = 1.0;  // sign of the generalized binomial coefficient
  for (int i = 0; i < 100000; ++i) {
    if (i > 0 && order - i + 1.0 < 0.0) sign = -sign;
    const double log_coef = lg_order - std::lgamma(i + 1.0) - std::lgamma(order - i + 1.0);
    const double j = order - i;
    const double log_t0 = log_coef + i * log_q + j * log_1mq;
    const double log_t1 = log_coef + j * log_q + i * log_1mq;
    const double log_e0 = std::log(0.5) + LogErfc((i - z0) / (std::sqrt(2.0) * sigma));
    const double log_e1 = std::log(0.5) + LogErfc((z0 - j) / (std::sqrt(2.0) * sigma));
    const double log_s0 = log_t0 + (static_cast<double>(i) * i - i) / (2.0 * sigma * sigma) + log_e0;
    const double log_s1 = log_t1 + (j * j - j) / (2.0 * sigma * sigma) + log_e1;
    if (sign > 0) {
      log_a0 = LogAdd(log_a0, log_s0);
      log_a1 = LogAdd(log_a1, log_s1);
    } else {
      log_a0 = LogSub(log_a0, log_s0);
      log_a1 = LogSub(log_a1, log_s1);
    }
    if (std::max(log_s0, log_s1) < -75.0) break;
  }
  return LogAdd(log_a0, log_a1);
}

}  // namespace

std::vector<double> DefaultOrders() {
  std::vector<double> orders = {1.25, 1.5, 1.75};
  for (int a = 2; a <= 256; ++a) orders.push_back(a);
  return orders;
}

double LogMomentSubsampledGaussian(double q, double sigma, double order) {
  Require(q >= 0.0 && q <= 1.0, ErrorCode::kDomain, "sampling rate must lie in [0, 1]");
  Require(order > 1.0, ErrorCode::kDomain, "Renyi orders must exceed 1");
  if (q == 0.0) return 0.0;
  if (sigma <= 0.0) {
    Fail(ErrorCode::kInfinitePrivacyLoss, "noise multiplier 0 has no finite Renyi DP");
  }
  if (q == 1.0) return order * (order - 1.0) / (2.0 * sigma * sigma);
  if (IsInteger(order)) return LogMomentInteger(q, sigma, static_cast<int>(order));
  return LogMomentFractional(q, sigma, order);
}

RdpCurve RdpSubsampledGaussian(double q, double sigma, std::int64_t steps,
                               const std::vector<double>& orders) {
  Require(q >= 0.0 && q <= 1.0, ErrorCode::kDomain, "sampling rate must lie in [0, 1]");
  Require(steps >= 0, ErrorCode::kDomain, "step count must be >= 0");
  Require(!orders.empty(), ErrorCode::kDomain, "need at least one Renyi order");
  Require(std::is_sorted(orders.begin(), orders.end()), ErrorCode::kDomain,
          "Renyi orders must be ascending");
  if (q > 0.0 && sigma <= 0.0) {
    Fail(ErrorCode::kInfinitePrivacyLoss, "noise multiplier 0 has no finite Renyi DP");
  }
  Require(sigma > 0.0 || q == 0.0, ErrorCode::kDomain, "noise multiplier must be positive");
  RdpCurve curve;
  curve.mechanism = {q, sigma, steps};
  curve.orders = orders;
  curve.eps_rdp.reserve(orders.size());
  const auto t = static_cast<double>(steps);
  for (double order : orders) {
    Require(order > 1.0, ErrorCode::kDomain, "Renyi orders must exceed 1");
    if (steps == 0 || q == 0.0) {
      curve.eps_rdp.push_back(0.0);
    } else if (q == 1.0) {
      curve.eps_rdp.push_back(t * order / (2.0 * sigma * sigma));
    } else {
      const double per_step = LogMomentSubsampledGaussian(q, sigma, order) / (order - 1.0);
      curve.eps_rdp.push_back(std::max(0.0, t * per_step));
    }
  }
  return curve;
}

PrivacySpend RdpToDp(const RdpCurve& curve, double delta) {
  Require(delta > 0.0 && delta < 1.0, ErrorCode::kDomain, "delta must lie in (0, 1)");
  Require(!curve.orders.empty() && curve.orders.size() == curve.eps_rdp.size(), ErrorCode::kDomain,
          "RDP curve must be non-empty with matching lengths");
  PrivacySpend spend;
  spend.delta = delta;
  spend.epsilon = kInfinity;
  const double log_inv_delta = std::log(1.0 / delta);
  for (std::size_t i = 0; i < curve.orders.size(); ++i) {
    const double eps = curve.eps_rdp[i] + log_inv_delta / (curve.orders[i] - 1.0);
    if (eps < spend.epsilon) {
      spend.epsilon = eps;
      spend.argmin_order = curve.orders[i];
    }
  }
  return spend;
}

PrivacySpend ComputeDpSgdSpend(double q, double sigma, std::int64_t steps, double delta,
                               const std::vector<double>& orders) {
  if (steps == 0) return {0.0, 0.0, std::nullopt};
  return RdpToDp(RdpSubsampledGaussian(q, sigma, steps, orders), delta);
}

PrivacySpend GroupEpsilon(const GroupPrivacyQuery& query) {
  Require(query.group_size >= 1, ErrorCode::kDomain, "group size must be >= 1");
  Require(std::isfinite(query.base.epsilon) && query.base.epsilon >= 0.0, ErrorCode::kDomain,
          "group privacy needs a finite base epsilon");
  PrivacySpend out = query.base;
  out.epsilon = query.group_size * query.base.epsilon;
  return out;
}

std::vector<std::string> AccountingCaveats() {
  return {
      "Poisson-subsampling RDP bound applied to shuffled fixed-size batches",
      "with microbatch_count < batch_size the adjacency unit is one microbatch, not one record",
      "privacy loss from hyperparameter search is not included (epsilon is an underestimate)",
      "group privacy scales epsilon by k only; delta is not inflated",
  };
}

}  // namespace dptails
