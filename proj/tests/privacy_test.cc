//
// Copyright 2026 The dprobust Authors
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

#include "dprobust/privacy.h"

#include <cmath>
#include <limits>
#include <thread>
#include <vector>

#include <gtest/gtest.h>

#include "dprobust/errors.h"

namespace dprobust {
namespace {

FitResult RegressionFit(Eigen::Index n, std::uint64_t seed) {
  ScenarioSpec spec;
  spec.n = n;
  spec.seed = seed;
  PsiConfig cfg;
  cfg.weight = WeightKind::kInverseNorm;
  return FitMallows(GenerateScenario(spec), cfg);
}

SensitivityReport Gamma(double g) {
  SensitivityReport r;
  r.gamma = g;
  return r;
}

TEST(MechanismScaleTest, HandArithmetic) {
  // ln 100 = 4.605170186, ln 200 = 5.298317367;
  // 5 sqrt(2 * 4.605170186 * 5.298317367) / 100 = 5 * 6.985645 / 100.
  EXPECT_NEAR(MechanismScale(1.0, 100, {1.0, 0.01}), 0.34929, 1e-4);
}

TEST(MechanismScaleTest, Limits) {
  EXPECT_EQ(MechanismScale(0.0, 100, {1.0, 0.01}), 0.0);
  EXPECT_LT(MechanismScale(1.0, 100, {1e12, 0.01}), 1e-11);
  EXPECT_THROW(MechanismScale(1.0, 1, {1.0, 0.01}), ValidationError);
  EXPECT_THROW(MechanismScale(1.0, 100, {0.0, 0.01}), ValidationError);
  EXPECT_THROW(MechanismScale(1.0, 100, {1.0, 1.0}), ValidationError);
  EXPECT_THROW(MechanismScale(-1.0, 100, {1.0, 0.01}), ValidationError);
}

TEST(MechanismScaleTest, StrictlyMonotone) {
  double prev = INFINITY;
  for (double eps : {0.01, 0.1, 0.5, 1.0, 2.0, 10.0}) {
    const double s = MechanismScale(1.0, 500, {eps, 1e-6});
    EXPECT_LT(s, prev);
    prev = s;
  }
  prev = INFINITY;
  for (double delta : {1e-12, 1e-8, 1e-4, 0.1, 0.9}) {
    const double s = MechanismScale(1.0, 500, {1.0, delta});
    EXPECT_LT(s, prev);
    prev = s;
  }
  prev = INFINITY;
  for (double n = 3; n < 5000; n *= 1.7) {
    const double s = MechanismScale(1.0, n, {1.0, 1e-6});
    EXPECT_LT(s, prev);
    prev = s;
  }
}

TEST(ReleaseEstimateTest, ZeroGammaIsExact) {
  const FitResult fit = RegressionFit(200, 1);
  const DPRelease r = ReleaseEstimate(fit, Gamma(0.0), fit.n(), {1.0, 1e-6}, 7);
  EXPECT_EQ(r.value, fit.theta_hat);
  EXPECT_EQ(r.noise_scale, 0.0);
}

TEST(ReleaseEstimateTest, DeterministicPerSeed) {
  const FitResult fit = RegressionFit(200, 1);
  const DPRelease a = ReleaseEstimate(fit, Gamma(2.0), fit.n(), {1.0, 1e-6}, 9);
  const DPRelease b = ReleaseEstimate(fit, Gamma(2.0), fit.n(), {1.0, 1e-6}, 9);
  const DPRelease c = ReleaseEstimate(fit, Gamma(2.0), fit.n(), {1.0, 1e-6}, 10);
  EXPECT_EQ(a.value, b.value);
  EXPECT_NE(a.value, c.value);
  EXPECT_EQ(a.seed, 9u);
  EXPECT_NEAR(a.noise_scale,
              MechanismScale(2.0, static_cast<double>(fit.n()), {1.0, 1e-6}),
              0.0);
}

TEST(ReleaseEstimateTest, NoiseRootMeanSquareMatchesChiMoment) {
  const FitResult fit = RegressionFit(1000, 3);
  const SensitivityReport rep = GesRegressionBound(fit);
  const PrivacyParams params{0.2, 1e-6};
  double sum_sq = 0.0;
  double scale = 0.0;
  for (std::uint64_t s = 0; s < 2000; ++s) {
    const DPRelease r = ReleaseEstimate(fit, rep, 1000, params, s);
    sum_sq += (r.value - fit.theta_hat).squaredNorm();
    scale = r.noise_scale;
  }
  const double rms = std::sqrt(sum_sq / 2000.0);
  const double want = scale * std::sqrt(static_cast<double>(fit.p()));
  EXPECT_NEAR(rms, want, 0.05 * want);
}

TEST(ReleaseEstimateTest, RefusesUnboundedAndUnconverged) {
  FitResult fit = RegressionFit(100, 2);
  EXPECT_THROW(ReleaseEstimate(fit, Gamma(INFINITY), 100, {1.0, 1e-6}, 1),
               UnboundedSensitivityError);
  fit.converged = false;
  EXPECT_THROW(ReleaseEstimate(fit, Gamma(1.0), 100, {1.0, 1e-6}, 1),
               ValidationError);
}

TEST(ReleaseEstimateTest, MinimumSampleSizeFlagAndStrictMode) {
  const FitResult fit = RegressionFit(100, 2);
  ReleaseOptions opt;
  DPRelease r = ReleaseEstimate(fit, Gamma(1.0), 100, {1.0, 1e-6}, 1, opt);
  EXPECT_FALSE(r.min_n_satisfied);
  EXPECT_TRUE(std::isnan(r.min_n_required));

  MinNConstants k;
  k.N0 = 50;
  k.eigen_max_M = k.b;  // log term vanishes, N1 = 1
  k.L_n = 1e-3;
  k.C1 = 1e-3;
  k.C2 = 0.0;
  opt.min_n_constants = k;
  r = ReleaseEstimate(fit, Gamma(1.0), 100, {1.0, 1e-6}, 1, opt);
  EXPECT_TRUE(r.min_n_satisfied);
  EXPECT_EQ(r.min_n_required, 50);

  opt.min_n_constants->N0 = 1e6;
  opt.strict_min_n = true;
  EXPECT_THROW(ReleaseEstimate(fit, Gamma(1.0), 100, {1.0, 1e-6}, 1, opt),
               InsufficientSampleError);
  opt.strict_min_n = false;
  r = ReleaseEstimate(fit, Gamma(1.0), 100, {1.0, 1e-6}, 1, opt);
  EXPECT_FALSE(r.min_n_satisfied);
  EXPECT_EQ(r.min_n_required, 1e6);
}

TEST(ReleasePValueTest, ZeroGammaAndClamp) {
  const DPRelease a = ReleasePValue(0.37, Gamma(0.0), 100, {1.0, 1e-6}, 4);
  EXPECT_EQ(a.value(0), 0.37);
  const double scale = MechanismScale(1.0, 100, {1.0, 1e-6});
  const double z = 0.8 / scale;  // raw = 0.9 + 0.8 = 1.7
  const DPRelease b =
      ReleasePValueWithDraw(0.9, Gamma(1.0), 100, {1.0, 1e-6}, z);
  EXPECT_EQ(b.value(0), 1.0);
  EXPECT_NEAR((*b.raw_unclamped)(0), 1.7, 1e-12);
  const DPRelease c =
      ReleasePValueWithDraw(0.1, Gamma(1.0), 100, {1.0, 1e-6}, -z);
  EXPECT_EQ(c.value(0), 0.0);
  EXPECT_THROW(ReleasePValue(1.2, Gamma(1.0), 100, {1.0, 1e-6}, 1),
               ValidationError);
}

TEST(ReleasePValueTest, DominantNoiseIsCoinFlip) {
  int below = 0;
  for (std::uint64_t s = 0; s < 2000; ++s) {
    const DPRelease r = ReleasePValue(0.5, Gamma(1.0), 200, {0.001, 1e-6}, s);
    if (r.value(0) < 0.05) ++below;
  }
  const double frac = below / 2000.0;
  EXPECT_GE(frac, 0.40);
  EXPECT_LE(frac, 0.60);
}

TEST(LedgerTest, EmptyAndComposition) {
  BudgetLedger ledger;
  EXPECT_EQ(ledger.Totals(), std::make_pair(0.0, 0.0));
  ledger.Spend("a", {0.1, 1e-6});
  ledger.Spend("b", {0.2, 1e-6});
  EXPECT_EQ(ledger.Totals().first, 0.3);
  EXPECT_EQ(ledger.Totals().second, 2e-6);
  EXPECT_EQ(ledger.TotalsExact().first, "0.3");
  EXPECT_EQ(ledger.TotalsExact().second, "0.000002");
  EXPECT_EQ(ledger.entries().size(), 2u);
  EXPECT_EQ(ledger.entries()[1].label, "b");
}

TEST(LedgerTest, ThousandSmallSpendsAreExact) {
  BudgetLedger ledger;
  for (int i = 0; i < 1000; ++i) ledger.Spend("s", {1e-3, 1e-9});
  EXPECT_EQ(ledger.Totals().first, 1.0);
  EXPECT_EQ(ledger.Totals().second, 1e-6);
  EXPECT_EQ(ledger.TotalsExact().first, "1");
}

TEST(LedgerTest, ConcurrentSpendsAreSerialized) {
  BudgetLedger ledger;
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&ledger] {
      for (int i = 0; i < 250; ++i) ledger.Spend("t", {1e-3, 1e-9});
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(ledger.entries().size(), 2000u);
  EXPECT_EQ(ledger.Totals().first, 2.0);
  EXPECT_EQ(ledger.Totals().second, 2e-6);
}

TEST(LedgerTest, ReleasesAppendEntries) {
  BudgetLedger ledger;
  ReleaseOptions opt;
  opt.ledger = &ledger;
  const FitResult fit = RegressionFit(100, 2);
  ReleaseEstimate(fit, Gamma(1.0), 100, {0.5, 1e-6}, 1, opt);
  opt.label = "test";
  ReleasePValue(0.2, Gamma(1.0), 100, {0.25, 1e-7}, 1, opt);
  ASSERT_EQ(ledger.entries().size(), 2u);
  EXPECT_EQ(ledger.entries()[0].label, "estimate");
  EXPECT_EQ(ledger.entries()[1].label, "test");
  EXPECT_EQ(ledger.Totals().first, 0.75);
  EXPECT_EQ(ledger.Totals().second, 1.1e-6);
}

TEST(ExactDecimalTest, RoundTrips) {
  for (double v : {0.0, 1.0, 0.1, 1e-9, 123.456, 2.5e-20, 1e12}) {
    EXPECT_EQ(ExactDecimal::FromDouble(v).ToDouble(), v) << v;
  }
  EXPECT_EQ(ExactDecimal::FromDouble(1e-30).ToString(), "0");
  EXPECT_THROW(ExactDecimal::FromDouble(1e20), ValidationError);
  EXPECT_THROW(ExactDecimal::FromDouble(NAN), ValidationError);
}

}  // namespace
}  // namespace dprobust
