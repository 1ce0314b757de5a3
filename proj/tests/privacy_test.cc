//
// Copyright 2026 The fedledger Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "fedledger/privacy.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "fedledger/personalization.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace fedledger {
namespace {

using ::fedledger::testing::TestRng;
using ::fedledger::testing::VectorOf;

// Alpha grid rebuilt independently of the library.
std::vector<double> OracleAlphas() {
  std::vector<double> a = {1.25, 1.5, 1.75};
  for (int i = 2; i <= 64; ++i) a.push_back(i);
  a.push_back(128);
  a.push_back(256);
  return a;
}

double BruteForceEpsilon(double z, double rounds, double delta) {
  double best = std::numeric_limits<double>::infinity();
  for (double a : OracleAlphas()) {
    best = std::min(best, rounds * a / (2 * z * z) + std::log(1 / delta) / (a - 1));
  }
  return best;
}

double EpsilonAfter(double z, uint64_t rounds, double delta) {
  AccountantState state;
  EXPECT_TRUE(state.ComposeGaussian(z, rounds).ok());
  return RdpToDp(state, delta)->epsilon;
}

LayoutPtr TwoLayerLayout(std::size_t each) {
  return std::make_shared<const LayerLayout>(
      *LayerLayout::Create({{"personal", each}, {"shared", each}}));
}

TEST(LaplaceScaleTest, Values) {
  EXPECT_EQ(*LaplaceScale(1, 1), 1.0);
  EXPECT_EQ(*LaplaceScale(2, 4), 0.5);
  EXPECT_EQ(LaplaceScale(0, 1).status().code(), absl::StatusCode::kInvalidArgument);
  EXPECT_EQ(LaplaceScale(1, 0).status().code(), absl::StatusCode::kInvalidArgument);
  EXPECT_EQ(LaplaceScale(-1, 1).status().code(), absl::StatusCode::kInvalidArgument);
}

TEST(LaplaceScaleTest, MonteCarloMoments) {
  const double b = *LaplaceScale(1, 1);
  auto rng = TestRng(21);
  const int n = 1000000;
  double sum = 0, sum_sq = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.Laplace(b);
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  EXPECT_LE(std::fabs(mean), 0.01);
  EXPECT_GE(var, 1.98);
  EXPECT_LE(var, 2.02);
}

TEST(GaussianSigmaTest, HighPrecisionValue) {
  // sqrt(2 ln(1.25e5)), evaluated with 50-digit arithmetic.
  EXPECT_NEAR(*GaussianSigma(1, 1, 1e-5), 4.844805262605389, 1e-12);
}

TEST(GaussianSigmaTest, ScalingIdentities) {
  for (double delta : {1e-5, 1e-3, 0.1}) {
    for (double eps : {0.5, 1.0, 3.0}) {
      EXPECT_EQ(*GaussianSigma(2, eps, delta), 2 * *GaussianSigma(1, eps, delta));
    }
    EXPECT_EQ(*GaussianSigma(1, 2, delta), *GaussianSigma(1, 1, delta) / 2);
  }
}

TEST(GaussianSigmaTest, Errors) {
  EXPECT_FALSE(GaussianSigma(1, 1, 1.25).ok());
  EXPECT_FALSE(GaussianSigma(1, 1, 2.0).ok());
  EXPECT_FALSE(GaussianSigma(1, 1, 0.0).ok());
  EXPECT_FALSE(GaussianSigma(0, 1, 1e-5).ok());
  EXPECT_FALSE(GaussianSigma(1, 0, 1e-5).ok());
}

TEST(ClipUpdateTest, ScalesLongVectors) {
  ParameterVector v = *ClipUpdate(VectorOf({6, 8}), 5);
  EXPECT_EQ(v[0], 3.0);
  EXPECT_EQ(v[1], 4.0);
}

TEST(ClipUpdateTest, ShortVectorUnchanged) {
  ParameterVector in = VectorOf({1, 2, 2});  // norm 3
  EXPECT_TRUE(*ClipUpdate(in, 5) == in);
  EXPECT_TRUE(*ClipUpdate(VectorOf({0, 0, 0}), 5) == VectorOf({0, 0, 0}));
}

TEST(ClipUpdateTest, RandomNormBound) {
  auto rng = TestRng(22);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> values(1 + rng.UniformInt(300));
    const double scale = std::exp(6 * rng.Uniform() - 3);
    for (double& x : values) x = scale * rng.Gaussian();
    const double c = 0.01 + rng.Uniform();
    ParameterVector in = VectorOf(values);
    ParameterVector out = *ClipUpdate(in, c);
    EXPECT_LE(out.L2Norm(), c + 1e-12);
    if (in.L2Norm() <= c) EXPECT_TRUE(out == in);
  }
}

TEST(ClipUpdateTest, RejectsBadNorm) {
  EXPECT_FALSE(ClipUpdate(VectorOf({1}), 0).ok());
  EXPECT_FALSE(ClipUpdate(VectorOf({1}), -1).ok());
}

TEST(AdaptiveNoiseTest, ZeroSigmaIsIdentity) {
  LayoutPtr layout = TwoLayerLayout(10);
  auto rng = TestRng(23);
  ParameterVector u = testing::RandomParams(layout, rng, 1.0);
  PersonalizationMask mask = *PersonalizationMask::FromLayerFlags(layout, {true, false}, 0.1);
  EXPECT_TRUE(*AdaptiveNoise(u, mask, 0, 0, rng) == u);
}

TEST(AdaptiveNoiseTest, ZeroSigmaULeavesPersonalizedCoordinates) {
  LayoutPtr layout = TwoLayerLayout(50);
  auto rng = TestRng(24);
  ParameterVector u = testing::RandomParams(layout, rng, 1.0);
  PersonalizationMask mask = *PersonalizationMask::FromLayerFlags(layout, {true, false}, 0.1);
  ParameterVector noisy = *AdaptiveNoise(u, mask, 0, 2, rng);
  for (std::size_t j = 0; j < 50; ++j) {
    EXPECT_EQ(std::memcmp(&noisy[j], &u[j], sizeof(double)), 0);
  }
  std::size_t changed = 0;
  for (std::size_t j = 50; j < 100; ++j) changed += noisy[j] != u[j];
  EXPECT_EQ(changed, 50u);
}

TEST(AdaptiveNoiseTest, PerGroupVariancesAndIndependence) {
  const std::size_t half = 100000;
  LayoutPtr layout = TwoLayerLayout(half);
  PersonalizationMask mask = *PersonalizationMask::FromLayerFlags(layout, {true, false}, 0.1);
  auto rng = TestRng(25);
  ParameterVector noisy = *AdaptiveNoise(ParameterVector::Zeros(layout), mask, 1, 3, rng);
  double su = 0, sv = 0, suu = 0, svv = 0, suv = 0;
  for (std::size_t i = 0; i < half; ++i) {
    const double a = noisy[i], b = noisy[half + i];
    su += a;
    sv += b;
    suu += a * a;
    svv += b * b;
    suv += a * b;
  }
  const double n = half;
  const double var_u = suu / n - (su / n) * (su / n);
  const double var_v = svv / n - (sv / n) * (sv / n);
  EXPECT_NEAR(var_u, 1.0, 0.05);
  EXPECT_NEAR(var_v, 9.0, 0.45);
  const double cov = suv / n - (su / n) * (sv / n);
  EXPECT_LE(std::fabs(cov / std::sqrt(var_u * var_v)), 0.01);
}

TEST(AdaptiveNoiseTest, Errors) {
  LayoutPtr layout = TwoLayerLayout(3);
  PersonalizationMask mask = PersonalizationMask::AllShared(layout);
  auto rng = TestRng(26);
  ParameterVector u = ParameterVector::Zeros(layout);
  EXPECT_EQ(AdaptiveNoise(u, mask, 2, 1, rng).status().code(),
            absl::StatusCode::kInvalidArgument);
  EXPECT_FALSE(AdaptiveNoise(u, mask, -1, 1, rng).ok());
  EXPECT_FALSE(AdaptiveNoise(VectorOf({1, 2}), mask, 1, 1, rng).ok());
}

TEST(RdpTest, GaussianValues) {
  EXPECT_EQ(*RdpOfGaussian(1, 2), 1.0);
  EXPECT_EQ(*RdpOfGaussian(2, 2), 0.25);
  EXPECT_FALSE(RdpOfGaussian(1, 1).ok());
  EXPECT_FALSE(RdpOfGaussian(1, 0.5).ok());
  EXPECT_FALSE(RdpOfGaussian(0, 2).ok());
}

TEST(RdpTest, MonotoneOverGrid) {
  const std::vector<double> alphas = OracleAlphas();
  std::vector<double> zs;
  for (double z = 0.3; z < 64; z *= 1.7) zs.push_back(z);
  for (double z : zs) {
    for (std::size_t i = 1; i < alphas.size(); ++i) {
      EXPECT_LT(*RdpOfGaussian(z, alphas[i - 1]), *RdpOfGaussian(z, alphas[i]));
    }
  }
  for (double a : alphas) {
    for (std::size_t i = 1; i < zs.size(); ++i) {
      EXPECT_GT(*RdpOfGaussian(zs[i - 1], a), *RdpOfGaussian(zs[i], a));
    }
  }
}

TEST(AccountantTest, GridMatchesOracle) {
  EXPECT_EQ(DefaultAlphaGrid(), OracleAlphas());
  const auto& zg = NoiseMultiplierGrid();
  ASSERT_EQ(zg.size(), 200u);
  EXPECT_DOUBLE_EQ(zg.front(), 0.3);
  EXPECT_DOUBLE_EQ(zg.back(), 64.0);
  for (std::size_t i = 1; i < zg.size(); ++i) {
    EXPECT_NEAR(zg[i] / zg[i - 1], std::pow(64 / 0.3, 1.0 / 199), 1e-12);
  }
}

TEST(AccountantTest, CompositionIsExactlyAdditive) {
  for (double z : {0.5, 1.0, 3.7}) {
    for (uint64_t t : {1, 2, 15, 1000}) {
      AccountantState state;
      ASSERT_TRUE(state.ComposeGaussian(z, t).ok());
      const std::vector<double> rdp = state.AccumulatedRdp();
      for (std::size_t i = 0; i < rdp.size(); ++i) {
        EXPECT_EQ(rdp[i], static_cast<double>(t) * *RdpOfGaussian(z, state.alpha_grid()[i]));
      }
      EXPECT_EQ(state.releases(), t);
    }
  }
}

TEST(AccountantTest, RepeatedSingleReleasesMatchBulkCount) {
  AccountantState one_by_one, bulk;
  for (int i = 0; i < 15; ++i) ASSERT_TRUE(one_by_one.ComposeGaussian(1.3).ok());
  ASSERT_TRUE(bulk.ComposeGaussian(1.3, 15).ok());
  EXPECT_EQ(one_by_one.AccumulatedRdp(), bulk.AccumulatedRdp());
}

TEST(RdpToDpTest, SingleReleaseMatchesBruteForce) {
  EXPECT_NEAR(EpsilonAfter(1, 1, 1e-5), BruteForceEpsilon(1, 1, 1e-5), 1e-9);
}

TEST(RdpToDpTest, StrictlyIncreasingInReleases) {
  double prev = 0;
  for (uint64_t t = 1; t <= 64; ++t) {
    const double eps = EpsilonAfter(2.0, t, 1e-5);
    EXPECT_GT(eps, prev);
    prev = eps;
  }
}

TEST(RdpToDpTest, SmallerDeltaCostsMore) {
  double prev = 0;
  for (double delta : {0.5, 0.1, 1e-2, 1e-3, 1e-5, 1e-8, 1e-12}) {
    const double eps = EpsilonAfter(1.5, 10, delta);
    EXPECT_GT(eps, prev);
    prev = eps;
  }
}

TEST(RdpToDpTest, Errors) {
  AccountantState empty;
  EXPECT_EQ(RdpToDp(empty, 1e-5).status().code(), absl::StatusCode::kFailedPrecondition);
  AccountantState state;
  ASSERT_TRUE(state.ComposeGaussian(1).ok());
  EXPECT_FALSE(RdpToDp(state, 0).ok());
  EXPECT_FALSE(RdpToDp(state, 1).ok());
  EXPECT_FALSE(state.ComposeGaussian(0).ok());
}

TEST(CalibrateTest, SingleRoundIsAccountantVerifiedAndGridMinimal) {
  PrivacySpec spec{.epsilon_target = 1, .delta = 1e-5, .clip_norm = 1,
                   .noise_split_rho = 1, .rounds = 1};
  NoiseCalibration cal = *CalibrateNoise(spec);
  EXPECT_LE(EpsilonAfter(cal.noise_multiplier, 1, 1e-5), 1.0);
  EXPECT_LE(BruteForceEpsilon(cal.noise_multiplier, 1, 1e-5), 1.0);
  const auto& grid = NoiseMultiplierGrid();
  const auto it = std::find(grid.begin(), grid.end(), cal.noise_multiplier);
  ASSERT_NE(it, grid.end());
  ASSERT_NE(it, grid.begin());
  EXPECT_GT(BruteForceEpsilon(*(it - 1), 1, 1e-5), 1.0);
  EXPECT_EQ(cal.sigma_u, cal.sigma_v);
}

TEST(CalibrateTest, SensitivityAndSplit) {
  for (double rho : {1.0, 2.0, 3.5}) {
    PrivacySpec spec{.epsilon_target = 4, .delta = 0.1, .clip_norm = 0.05,
                     .noise_split_rho = rho, .rounds = 15};
    NoiseCalibration cal = *CalibrateNoise(spec);
    EXPECT_EQ(cal.sensitivity, 0.1);
    EXPECT_EQ(cal.sigma_u, cal.noise_multiplier * cal.sensitivity);
    EXPECT_EQ(cal.sigma_v, rho * cal.sigma_u);
    EXPECT_NEAR(cal.sigma_v / cal.sigma_u, rho, 1e-15);
    EXPECT_LE(cal.epsilon, 4.0);
  }
}

TEST(CalibrateTest, MoreRoundsNeverLowerNoise) {
  for (double eps : {0.5, 1.0, 8.0}) {
    double prev = 0;
    for (std::size_t rounds : {1, 2, 4, 8, 16, 32, 64}) {
      PrivacySpec spec{.epsilon_target = eps, .delta = 1e-5, .clip_norm = 1,
                       .noise_split_rho = 2, .rounds = rounds};
      absl::StatusOr<NoiseCalibration> cal = CalibrateNoise(spec);
      if (!cal.ok()) break;
      EXPECT_GE(cal->noise_multiplier, prev);
      prev = cal->noise_multiplier;
    }
  }
}

TEST(CalibrateTest, ReverifiedAfterAllRounds) {
  for (double eps : {1.0, 2.0, 4.0, 8.0}) {
    PrivacySpec spec{.epsilon_target = eps, .delta = 0.1, .clip_norm = 0.05,
                     .noise_split_rho = 2, .rounds = 15};
    NoiseCalibration cal = *CalibrateNoise(spec);
    EXPECT_LE(EpsilonAfter(cal.noise_multiplier, 15, 0.1), eps);
    EXPECT_EQ(cal.epsilon, EpsilonAfter(cal.noise_multiplier, 15, 0.1));
  }
}

TEST(CalibrateTest, InfeasibleBudget) {
  PrivacySpec spec{.epsilon_target = 1e-3, .delta = 1e-5, .clip_norm = 1,
                   .noise_split_rho = 2, .rounds = 1000};
  EXPECT_EQ(CalibrateNoise(spec).status().code(), absl::StatusCode::kResourceExhausted);
}

TEST(PrivacySpecTest, Validate) {
  PrivacySpec ok;
  EXPECT_TRUE(ok.Validate().ok());
  PrivacySpec bad = ok;
  bad.epsilon_target = 0;
  EXPECT_FALSE(bad.Validate().ok());
  bad = ok;
  bad.delta = 1;
  EXPECT_FALSE(bad.Validate().ok());
  bad = ok;
  bad.clip_norm = 0;
  EXPECT_FALSE(bad.Validate().ok());
  bad = ok;
  bad.noise_split_rho = 0.5;
  EXPECT_FALSE(bad.Validate().ok());
}

}  // namespace
}  // namespace fedledger
