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

#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "test_util.hpp"

namespace dptails {
namespace {

TEST(RdpTest, UnsubsampledGaussianClosedForm) {
  const RdpCurve curve = RdpSubsampledGaussian(1.0, 1.0, 1, {2.0});
  EXPECT_EQ(curve.eps_rdp[0], 1.0);
  const RdpCurve many = RdpSubsampledGaussian(1.0, 2.0, 7);
  for (std::size_t i = 0; i < many.orders.size(); ++i) {
    EXPECT_DOUBLE_EQ(many.eps_rdp[i], 7.0 * many.orders[i] / 8.0);
  }
}

TEST(RdpTest, EmptyCompositionIsZero) {
  const RdpCurve curve = RdpSubsampledGaussian(0.3, 0.7, 0);
  for (double e : curve.eps_rdp) EXPECT_EQ(e, 0.0);
  EXPECT_EQ(ComputeDpSgdSpend(0.3, 0.7, 0).epsilon, 0.0);
}

TEST(RdpTest, ZeroNoiseIsInfinite) {
  EXPECT_EQ(CodeOf([] { RdpSubsampledGaussian(0.01, 0.0, 10); }),
            ErrorCode::kInfinitePrivacyLoss);
  EXPECT_EQ(CodeOf([] { RdpSubsampledGaussian(1.5, 1.0, 10); }), ErrorCode::kDomain);
  EXPECT_EQ(CodeOf([] { RdpSubsampledGaussian(0.1, 1.0, 10, {1.0}); }), ErrorCode::kDomain);
}

TEST(RdpTest, GoldenCurveAgainstHighPrecision) {
  const RdpCurve curve = RdpSubsampledGaussian(0.01, 1.0, 1000);
  for (std::size_t i = 0; i < curve.orders.size(); ++i) {
    const double a = curve.orders[i];
    const double expected =
        (1000 * oracle::RdpLogMoment(0.01, 1.0, a) / oracle::Big(a - 1)).convert_to<double>();
    EXPECT_NEAR(curve.eps_rdp[i], expected, 1e-9 * expected + 1e-300) << "order " << a;
  }
}

TEST(RdpTest, FractionalOrdersAgainstQuadrature) {
  for (double q : {1e-3, 0.1, 0.5}) {
    for (double sigma : {0.5, 2.0}) {
      for (double a : {1.25, 1.5, 1.75}) {
        const double got = LogMomentSubsampledGaussian(q, sigma, a);
        const double expected = oracle::RdpLogMoment(q, sigma, a).convert_to<double>();
        EXPECT_NEAR(got, expected, 1e-9 * std::abs(expected)) << q << " " << sigma << " " << a;
      }
    }
  }
}

TEST(RdpTest, CompositionIsLinear) {
  const RdpCurve one = RdpSubsampledGaussian(0.02, 1.3, 250);
  const RdpCurve four = RdpSubsampledGaussian(0.02, 1.3, 1000);
  for (std::size_t i = 0; i < one.orders.size(); ++i) {
    EXPECT_DOUBLE_EQ(four.eps_rdp[i], 4.0 * one.eps_rdp[i]);
  }
}

TEST(RdpToDpTest, Examples) {
  RdpCurve zero;
  for (int a = 2; a <= 4096; ++a) {
    zero.orders.push_back(a);
    zero.eps_rdp.push_back(0.0);
  }
  const PrivacySpend z = RdpToDp(zero, 1e-5);
  EXPECT_LE(z.epsilon, std::log(1e5) / 4095.0 + 1e-15);
  EXPECT_LT(z.epsilon, 0.003);

  RdpCurve single;
  single.orders = {2.0};
  single.eps_rdp = {1.0};
  const PrivacySpend s = RdpToDp(single, 1e-5);
  EXPECT_NEAR(s.epsilon, 1.0 + std::log(1e5), 1e-12);
  EXPECT_NEAR(s.epsilon, 12.513, 1e-3);
  ASSERT_TRUE(s.argmin_order.has_value());
  EXPECT_EQ(*s.argmin_order, 2.0);
}

TEST(RdpToDpTest, PointwiseDominance) {
  const RdpCurve a = RdpSubsampledGaussian(0.01, 1.5, 500);
  const RdpCurve b = RdpSubsampledGaussian(0.01, 1.0, 500);
  for (std::size_t i = 0; i < a.orders.size(); ++i) ASSERT_LE(a.eps_rdp[i], b.eps_rdp[i]);
  EXPECT_LE(RdpToDp(a).epsilon, RdpToDp(b).epsilon);
}

TEST(RdpToDpTest, MoreOrdersNeverHurt) {
  const std::vector<double> few = {2, 4, 8, 16, 32};
  const double coarse = ComputeDpSgdSpend(0.01, 1.0, 1000, 1e-5, few).epsilon;
  const double fine = ComputeDpSgdSpend(0.01, 1.0, 1000).epsilon;
  EXPECT_LE(fine, coarse);
}

TEST(AccountantTest, MonotoneOverGrid) {
  for (double q : {1e-3, 1e-2, 0.1}) {
    for (double sigma : {0.5, 1.0, 2.0, 4.0}) {
      double prev = 0.0;
      for (std::int64_t t : {100, 1000, 10000}) {
        const double e = ComputeDpSgdSpend(q, sigma, t).epsilon;
        EXPECT_GE(e, prev) << q << " " << sigma << " " << t;
        prev = e;
      }
    }
    for (std::int64_t t : {100, 1000, 10000}) {
      double prev = kInfinity;
      for (double sigma : {0.5, 1.0, 2.0, 4.0}) {
        const double e = ComputeDpSgdSpend(q, sigma, t).epsilon;
        EXPECT_LE(e, prev);
        prev = e;
      }
    }
  }
  for (double sigma : {0.5, 1.0, 2.0, 4.0}) {
    double prev = 0.0;
    for (double q : {1e-3, 1e-2, 0.1}) {
      const double e = ComputeDpSgdSpend(q, sigma, 1000).epsilon;
      EXPECT_GE(e, prev);
      prev = e;
    }
  }
}

TEST(GroupPrivacyTest, LinearInGroupSize) {
  const PrivacySpend base{3.54, 1e-5, std::nullopt};
  EXPECT_DOUBLE_EQ(GroupEpsilon({base, 1}).epsilon, 3.54);
  EXPECT_DOUBLE_EQ(GroupEpsilon({base, 2}).epsilon, 7.08);
  EXPECT_EQ(GroupEpsilon({base, 2}).delta, 1e-5);
  EXPECT_EQ(GroupEpsilon({{0.0, 1e-5, std::nullopt}, 9}).epsilon, 0.0);
  EXPECT_EQ(CodeOf([&] { GroupEpsilon({base, 0}); }), ErrorCode::kDomain);
}

TEST(AccountantTest, CaveatsPresent) { EXPECT_FALSE(AccountingCaveats().empty()); }

}  // namespace
}  // namespace dptails
