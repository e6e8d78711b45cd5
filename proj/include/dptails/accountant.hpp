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
#ifndef DPTAILS_ACCOUNTANT_HPP_
#define DPTAILS_ACCOUNTANT_HPP_

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace dptails {

inline constexpr double kDefaultDelta = 1e-5;
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct SubsampledGaussian {
  double sampling_rate = 0.0;     // q
  double noise_multiplier = 1.0;  // sigma
  std::int64_t steps = 0;         // T
};

// Renyi DP of T compositions of the Poisson-subsampled Gaussian mechanism.
struct RdpCurve {
  std::vector<double> orders;
  std::vector<double> eps_rdp;
  SubsampledGaussian mechanism;
};

struct PrivacySpend {
  double epsilon = 0.0;  // kInfinity for non-private training
  double delta = kDefaultDelta;
  std::optional<double> argmin_order;

  bool is_private() const { return epsilon != kInfinity; }

  static PrivacySpend NonPrivate() { return {kInfinity, 0.0, std::nullopt}; }
};

// {1.25, 1.5, 1.75, 2, 3, ..., 256}.
std::vector<double> DefaultOrders();

// Log of A_alpha = E_{z ~ N(0, sigma^2)} [((1 - q) + q e^{(2z - 1) / (2 sigma^2)})^alpha]
// for a single step. Integer orders use the binomial expansion; fractional
// orders use the two-sided erfc series. All in log space.
double LogMomentSubsampledGaussian(double q, double sigma, double order);

// Throws kInfinitePrivacyLoss for sigma == 0 with q > 0, kDomain on other
// precondition failures.
RdpCurve RdpSubsampledGaussian(double q, double sigma, std::int64_t steps,
                               const std::vector<double>& orders = DefaultOrders());

// epsilon = min_alpha [eps(alpha) + log(1/delta) / (alpha - 1)].
PrivacySpend RdpToDp(const RdpCurve& curve, double delta = kDefaultDelta);

// Convenience: DP-SGD spend for given (q, sigma, T). T == 0 gives epsilon 0.
PrivacySpend ComputeDpSgdSpend(double q, double sigma, std::int64_t steps,
                               double delta = kDefaultDelta,
                               const std::vector<double>& orders = DefaultOrders());

struct GroupPrivacyQuery {
  PrivacySpend base;
  int group_size = 1;
};

// k * epsilon; delta passed through unchanged.
PrivacySpend GroupEpsilon(const GroupPrivacyQuery& query);

// Report caveats attached to every accounting output.
std::vector<std::string> AccountingCaveats();

}  // namespace dptails

#endif  // DPTAILS_ACCOUNTANT_HPP_
