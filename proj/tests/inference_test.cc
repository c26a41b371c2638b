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

#include "dprobust/inference.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "dprobust/errors.h"
#include "dprobust/numerics.h"
#include "oracles.h"

namespace dprobust {
namespace {

Dataset Scenario(Eigen::Index n, std::uint64_t seed,
                 ScenarioKind kind = ScenarioKind::kRegressionNormal) {
  ScenarioSpec spec;
  spec.kind = kind;
  spec.n = n;
  spec.seed = seed;
  return GenerateScenario(spec);
}

PsiConfig Weighted() {
  PsiConfig cfg;
  cfg.weight = WeightKind::kInverseNorm;
  return cfg;
}

PsiConfig Identity() {
  PsiConfig cfg;
  cfg.family = PsiFamily::kIdentity;
  return cfg;
}

const RestrictedSpec kNull34{{3, 4}};

// Intercept-only restricted fit whose residuals are orthogonal to x1, so the
// unrestricted least-squares slope on x1 is exactly zero.
Dataset OrthogonalDesign() {
  Eigen::MatrixXd x(6, 1);
  x << 1, -1, -1, 1, 0, 0;
  Eigen::VectorXd y(6);
  y << 1, 1, 3, 3, 2, 5;  // residuals about 2.5 sum to zero against x
  return Dataset(x, y, {"x1"}).WithInterceptColumn();
}

TEST(WaldTest, ZeroEstimateGivesZero) {
  FitResult fit = FitMallows(Scenario(200, 1), Weighted());
  fit.theta_hat(3) = 0.0;
  fit.theta_hat(4) = 0.0;
  EXPECT_EQ(WaldStatistic(fit, kNull34), 0.0);
}

TEST(WaldTest, ScalarMatchesSandwichByHand) {
  Eigen::MatrixXd x(3, 1);
  x << 0.0, 1.0, 3.0;
  Eigen::VectorXd y(3);
  y << 1.0, 2.5, 3.0;
  const Dataset d = Dataset(x, y, {"x1"}).WithInterceptColumn();
  const FitResult fit = FitMallows(d, Identity());
  // Least squares with the heteroskedastic sandwich, all by hand.
  const Eigen::MatrixXd xx = d.x();
  const Eigen::Vector2d b = testing::OlsByQr(xx, y);
  const Eigen::VectorXd e = y - xx * b;
  const Eigen::Matrix2d m = xx.transpose() * xx / 3.0;
  Eigen::Matrix2d q = Eigen::Matrix2d::Zero();
  for (int i = 0; i < 3; ++i) {
    q += e(i) * e(i) * xx.row(i).transpose() * xx.row(i) / 3.0;
  }
  const Eigen::Matrix2d v = m.inverse() * q * m.inverse();
  EXPECT_NEAR(WaldStatistic(fit, RestrictedSpec{{1}}), b(1) * b(1) / v(1, 1),
              1e-9);
}

TEST(WaldTest, LeastSquaresLimitInvariantToCovariateScale) {
  const Dataset d = Scenario(300, 4);
  PsiConfig cfg;
  cfg.c = 1e6;
  const double w = WaldStatistic(FitMallows(d, cfg), RestrictedSpec{{2}});
  Eigen::MatrixXd x = d.x();
  x.col(2) *= 7.5;
  const Dataset scaled(x, *d.y(), d.column_names(), true, d.response_name());
  EXPECT_NEAR(WaldStatistic(FitMallows(scaled, cfg), RestrictedSpec{{2}}), w,
              1e-8 * std::max(1.0, w));
}

TEST(WaldTest, RejectsUntestableSpecs) {
  const FitResult fit = FitMallows(Scenario(100, 2), Weighted());
  EXPECT_THROW(WaldStatistic(fit, RestrictedSpec{}), ValidationError);
  EXPECT_THROW(WaldStatistic(fit, RestrictedSpec{{7}}), ValidationError);
  const FitResult loc = FitLocationScale(
      Scenario(50, 2, ScenarioKind::kLocationScale), PsiConfig{});
  EXPECT_THROW(WaldStatistic(loc, RestrictedSpec{{0}}), ValidationError);
}

TEST(ScoreTest, ZeroWhenConstraintInactive) {
  const Dataset d = OrthogonalDesign();
  const RestrictedSpec r{{1}};
  const FitResult full = FitMallows(d, Identity());
  const FitResult restricted =
      FitRestricted(d, EstimatorKind::kMallows, Identity(), r);
  EXPECT_NEAR(full.theta_hat(1), 0.0, 1e-12);
  EXPECT_NEAR(ScoreStatistic(restricted, full, r), 0.0, 1e-20);
}

TEST(ScoreTest, InterceptOnlyRestrictionMatchesDirectFormula) {
  const Dataset d = Scenario(40, 9);
  const RestrictedSpec r{{1, 2, 3, 4}};
  const PsiConfig cfg = Weighted();
  const FitResult full = FitMallows(d, cfg);
  const FitResult restricted = FitRestricted(d, EstimatorKind::kMallows, cfg, r);
  // Direct evaluation with plain dense algebra.
  const Eigen::MatrixXd m = full.M_hat.dense();
  const Eigen::MatrixXd v = full.V_hat.dense();
  const Eigen::MatrixXd m22_1 =
      m.bottomRightCorner(4, 4) -
      m.bottomLeftCorner(4, 1) * m.topRightCorner(1, 4) / m(0, 0);
  const Eigen::MatrixXd u = m22_1 * v.bottomRightCorner(4, 4) * m22_1.transpose();
  const Eigen::VectorXd z =
      restricted.psi_values.rightCols(4).colwise().mean().transpose();
  EXPECT_NEAR(ScoreStatistic(restricted, full, r),
              z.dot(u.fullPivLu().solve(z)), 1e-10);
}

TEST(ScoreTest, NullQuantileMatchesChiSquare) {
  const PsiConfig cfg = Weighted();
  std::vector<double> stats;
  for (std::uint64_t s = 0; s < 2000; ++s) {
    const Dataset d = Scenario(1000, 50000 + s);
    const FitResult full = FitMallows(d, cfg);
    const FitResult restricted =
        FitRestricted(d, EstimatorKind::kMallows, cfg, kNull34);
    stats.push_back(1000.0 * ScoreStatistic(restricted, full, kNull34));
  }
  std::sort(stats.begin(), stats.end());
  const double q95 = stats[static_cast<std::size_t>(0.95 * stats.size())];
  const double want = ChiSquaredQuantile(2, 0.95);
  EXPECT_NEAR(q95, want, 0.1 * want);
}

TEST(LrTest, ZeroWhenConstraintInactive) {
  const Dataset d = OrthogonalDesign();
  const FitResult full = FitMallows(d, Identity());
  const FitResult restricted =
      FitRestricted(d, EstimatorKind::kMallows, Identity(), RestrictedSpec{{1}});
  const LrStatistics lr = LrStatistic(d, full, restricted);
  EXPECT_NEAR(lr.S, 0.0, 1e-12);
  EXPECT_NEAR(lr.S_tilde, 0.0, 1e-20);
}

TEST(LrTest, ScalarQuadraticFormByHand) {
  const Dataset d = Scenario(150, 3);
  const PsiConfig cfg = Weighted();
  const FitResult full = FitMallows(d, cfg);
  const FitResult restricted =
      FitRestricted(d, EstimatorKind::kMallows, cfg, RestrictedSpec{{2}});
  const Eigen::MatrixXd m = full.M_hat.dense();
  // Schur complement of the four free coefficients.
  const std::vector<int> free = {0, 1, 3, 4};
  Eigen::MatrixXd m11(4, 4);
  Eigen::VectorXd m12(4);
  for (int i = 0; i < 4; ++i) {
    m12(i) = m(free[i], 2);
    for (int j = 0; j < 4; ++j) m11(i, j) = m(free[i], free[j]);
  }
  const double m22_1 = m(2, 2) - m12.dot(m11.inverse() * m12);
  const double sigma = *full.sigma_hat;
  const LrStatistics lr = LrStatistic(d, full, restricted);
  EXPECT_NEAR(lr.S_tilde,
              m22_1 * full.theta_hat(2) * full.theta_hat(2) / (sigma * sigma),
              1e-10);
  EXPECT_LE(lr.S, 1e-12);
}

TEST(LrTest, ComparableToWaldUnderNull) {
  const PsiConfig cfg = Weighted();
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Dataset d = Scenario(1000, 700 + s);
    const FitResult full = FitMallows(d, cfg);
    const FitResult restricted =
        FitRestricted(d, EstimatorKind::kMallows, cfg, kNull34);
    const double ratio =
        LrStatistic(d, full, restricted).S_tilde / WaldStatistic(full, kNull34);
    EXPECT_GT(ratio, 0.5) << s;
    EXPECT_LT(ratio, 2.0) << s;
  }
}

TEST(LrTest, RequiresRegression) {
  const Dataset d = Scenario(200, 3, ScenarioKind::kLogistic);
  const FitResult full = FitRobustLogistic(d, Weighted());
  EXPECT_THROW(LrStatistic(d, full, full), ValidationError);
}

TEST(StatisticsTest, PermutationInvariant) {
  const Dataset d = Scenario(120, 5);
  std::vector<Eigen::Index> order(d.n());
  for (Eigen::Index i = 0; i < d.n(); ++i) order[i] = (i * 37 + 11) % d.n();
  const Dataset p = d.PermuteRows(order);
  const PsiConfig cfg = Weighted();
  const FitResult f1 = FitMallows(d, cfg);
  const FitResult f2 = FitMallows(p, cfg);
  const FitResult r1 = FitRestricted(d, EstimatorKind::kMallows, cfg, kNull34);
  const FitResult r2 = FitRestricted(p, EstimatorKind::kMallows, cfg, kNull34);
  EXPECT_NEAR(WaldStatistic(f1, kNull34), WaldStatistic(f2, kNull34), 1e-12);
  EXPECT_NEAR(ScoreStatistic(r1, f1, kNull34), ScoreStatistic(r2, f2, kNull34),
              1e-12);
  EXPECT_NEAR(LrStatistic(d, f1, r1).S_tilde, LrStatistic(p, f2, r2).S_tilde,
              1e-12);
}

TEST(LevelFunctionalTest, Examples) {
  EXPECT_EQ(LevelFunctional(0.0, 100, 2), 1.0);
  for (int k : {1, 2, 5}) {
    const double q = ChiSquaredQuantile(k, 0.95);
    EXPECT_NEAR(LevelFunctional(q / 250.0, 250, k), 0.05, 1e-8);
  }
  EXPECT_LT(LevelFunctional(1e6, 100, 3), 1e-300);
  double prev = 1.0;
  for (double s = 0.001; s < 0.2; s += 0.003) {
    const double a = LevelFunctional(s, 100, 2);
    EXPECT_LT(a, prev);
    prev = a;
  }
  EXPECT_THROW(LevelFunctional(-1.0, 10, 1), ValidationError);
}

TEST(DpTestTest, ZeroNoiseRoundTrip) {
  const Dataset d = Scenario(300, 8);
  TestOptions opt;
  opt.level_gamma_override = 0.0;
  for (TestKind kind : {TestKind::kWald, TestKind::kScore, TestKind::kLr}) {
    const TestResult t = DpTest(d, EstimatorKind::kMallows, Weighted(), kNull34,
                                kind, {1.0, 1e-6}, 3, QuantileMode::kCorrected,
                                opt);
    EXPECT_EQ(t.dp_pvalue.value(0), t.alpha_hat);
    EXPECT_NEAR(t.q_recovered, 300.0 * t.statistic,
                1e-8 * std::max(1.0, 300.0 * t.statistic));
    EXPECT_EQ(t.k, 2);
    EXPECT_FALSE(t.ci.has_value());
  }
}

TEST(DpTestTest, DeterministicAndLedgered) {
  const Dataset d = Scenario(300, 8);
  BudgetLedger ledger;
  TestOptions opt;
  opt.ledger = &ledger;
  const TestResult a = DpTest(d, EstimatorKind::kMallows, Weighted(), kNull34,
                              TestKind::kWald, {1.0, 1e-6}, 11,
                              QuantileMode::kCorrected, opt);
  const TestResult b = DpTest(d, EstimatorKind::kMallows, Weighted(), kNull34,
                              TestKind::kWald, {1.0, 1e-6}, 11,
                              QuantileMode::kCorrected, opt);
  EXPECT_EQ(a.dp_pvalue.value, b.dp_pvalue.value);
  EXPECT_EQ(*a.dp_pvalue.raw_unclamped, *b.dp_pvalue.raw_unclamped);
  EXPECT_EQ(a.level_report.gamma, b.level_report.gamma);
  EXPECT_EQ(ledger.entries().size(), 2u);
  EXPECT_GT(a.level_report.gamma, 0.0);
}

TEST(DpTestTest, LogisticWald) {
  const Dataset d = Scenario(400, 2, ScenarioKind::kLogistic);
  const TestResult t =
      DpTest(d, EstimatorKind::kLogistic, Weighted(), RestrictedSpec{{4}},
             TestKind::kWald, {1.0, 1e-6}, 1, QuantileMode::kCorrected);
  EXPECT_EQ(t.k, 1);
  ASSERT_TRUE(t.ci.has_value());
  EXPECT_LE(t.ci->first, t.ci->second);
}

TEST(DpTestTest, UnweightedRegressionRefused) {
  EXPECT_THROW(DpTest(Scenario(200, 1), EstimatorKind::kMallows, PsiConfig{},
                      kNull34, TestKind::kWald, {1.0, 1e-6}, 1,
                      QuantileMode::kCorrected),
               UnboundedSensitivityError);
}

DPRelease PValue(double p) {
  DPRelease r;
  r.value = Eigen::VectorXd::Constant(1, p);
  return r;
}

TEST(ConfidenceIntervalTest, Examples) {
  auto [lo, hi] = DpConfidenceInterval(PValue(1.0), 1, QuantileMode::kCorrected);
  EXPECT_EQ(lo, 0.0);
  EXPECT_EQ(hi, 0.0);
  std::tie(lo, hi) =
      DpConfidenceInterval(PValue(0.05), 1, QuantileMode::kCorrected);
  EXPECT_NEAR(hi, 1.9600, 1e-3);
  EXPECT_NEAR(lo, -1.9600, 1e-3);
  // The literal map reads the same p-value as a lower-tail probability.
  std::tie(lo, hi) =
      DpConfidenceInterval(PValue(0.95), 1, QuantileMode::kPaperLiteral);
  EXPECT_NEAR(hi, 1.9600, 1e-3);
  std::tie(lo, hi) =
      DpConfidenceInterval(PValue(0.0), 1, QuantileMode::kCorrected);
  EXPECT_TRUE(std::isinf(hi));
  EXPECT_THROW(DpConfidenceInterval(PValue(0.5), 2, QuantileMode::kCorrected),
               UnsupportedDimensionError);
}

TEST(ConfidenceIntervalTest, ZeroNoiseAtNullQuantile) {
  // alpha_hat = 0.05 exactly when n W is the 0.95 quantile.
  const double alpha = LevelFunctional(ChiSquaredQuantile(1, 0.95) / 100.0,
                                       100, 1);
  auto [lo, hi] =
      DpConfidenceInterval(PValue(alpha), 1, QuantileMode::kCorrected);
  EXPECT_NEAR(hi, 1.9600, 1e-3);
  EXPECT_NEAR(lo, -hi, 0.0);
}

// With the level sensitivity forced to zero, n W under the null follows
// chi-square(2) closely enough for a Kolmogorov-Smirnov distance below 0.05.
TEST(NullCalibrationTest, WaldMatchesChiSquareTwo) {
  const PsiConfig cfg = Weighted();
  std::vector<double> nw;
  for (std::uint64_t s = 0; s < 2000; ++s) {
    const FitResult fit = FitMallows(Scenario(1000, 90000 + s), cfg);
    nw.push_back(1000.0 * WaldStatistic(fit, kNull34));
  }
  std::sort(nw.begin(), nw.end());
  double ks = 0.0;
  for (std::size_t i = 0; i < nw.size(); ++i) {
    const double f = ChiSquaredCdf(2, nw[i]);
    ks = std::max({ks, std::abs(f - static_cast<double>(i) / nw.size()),
                   std::abs(f - static_cast<double>(i + 1) / nw.size())});
  }
  EXPECT_LT(ks, 0.05);
}

TEST(ParseTest, Names) {
  EXPECT_EQ(ParseTestKind("score"), TestKind::kScore);
  EXPECT_EQ(TestKindName(TestKind::kLr), "lr");
  EXPECT_EQ(ParseQuantileMode("paper-literal"), QuantileMode::kPaperLiteral);
  EXPECT_THROW(ParseTestKind("t"), ValidationError);
}

}  // namespace
}  // namespace dprobust
