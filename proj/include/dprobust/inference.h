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

// Robust Wald, score and likelihood-ratio-type tests, their level
// functional, private p-values and the confidence intervals derived from
// them by post-processing.

#ifndef DPROBUST_INFERENCE_H_
#define DPROBUST_INFERENCE_H_

#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>

#include "dprobust/data.h"
#include "dprobust/estimators.h"
#include "dprobust/privacy.h"
#include "dprobust/sensitivity.h"

namespace dprobust {

enum class TestKind { kWald, kScore, kLr };
std::string_view TestKindName(TestKind kind);
TestKind ParseTestKind(std::string_view name);

// kCorrected maps a p-value back through H_k^{-1}(1 - p); kPaperLiteral
// applies H_k^{-1}(p) directly.
enum class QuantileMode { kCorrected, kPaperLiteral };
std::string_view QuantileModeName(QuantileMode mode);
QuantileMode ParseQuantileMode(std::string_view name);

// T2' V22^{-1} T2 with V the fit's sandwich covariance.
double WaldStatistic(const FitResult& fit, const RestrictedSpec& r);

// Z' U^{-1} Z with Z the mean tested score at the restricted fit and
// U = M22.1 V22 M22.1' from the unrestricted fit.
double ScoreStatistic(const FitResult& fit_restricted,
                      const FitResult& fit_full, const RestrictedSpec& r);

struct LrStatistics {
  // (2/n) sum{rho at the full fit - rho at the restricted fit}; <= 0.
  double S = 0.0;
  // T2' H22.1 T2 with H the Hessian of the mean loss; >= 0.
  double S_tilde = 0.0;
};

// Regression fits only. Both losses use the full fit's scale.
LrStatistics LrStatistic(const Dataset& d, const FitResult& fit_full,
                         const FitResult& fit_restricted);

// 1 - H_k(n * statistic).
double LevelFunctional(double statistic, Eigen::Index n, int k);

// The statistic recovered from a released p-value.
double RecoverQuantile(double pvalue, int k, QuantileMode mode);

struct TestOptions {
  FitOptions fit;
  std::optional<double> domain_radius;
  // Test hook: replaces the level sensitivity (0 gives a noise-free run).
  std::optional<double> level_gamma_override;
  bool strict_min_n = false;
  BudgetLedger* ledger = nullptr;
};

struct TestResult {
  TestKind kind = TestKind::kWald;
  double statistic = 0.0;
  int k = 0;
  Eigen::Index n = 0;
  double alpha_hat = 1.0;
  SensitivityReport level_report;
  DPRelease dp_pvalue;
  // +inf when the released p-value sits at the unbounded end.
  double q_recovered = 0.0;
  std::optional<std::pair<double, double>> ci;
  QuantileMode mode = QuantileMode::kCorrected;
};

TestResult DpTest(const Dataset& d, EstimatorKind model, const PsiConfig& cfg,
                  const RestrictedSpec& r, TestKind kind,
                  const PrivacyParams& params, std::uint64_t seed,
                  QuantileMode mode, const TestOptions& options = {});

// (-sqrt(q), sqrt(q)) in standardized units. Reads nothing but the released
// p-value, so it is pure post-processing.
std::pair<double, double> DpConfidenceInterval(const DPRelease& pvalue, int k,
                                               QuantileMode mode);

}  // namespace dprobust

#endif  // DPROBUST_INFERENCE_H_
