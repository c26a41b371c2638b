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

// Empirical influence functions, gross-error-sensitivity bounds for each
// estimator family and for test level functionals, and the minimum sample
// size checks that accompany a private release.

#ifndef DPROBUST_SENSITIVITY_H_
#define DPROBUST_SENSITIVITY_H_

#include <optional>
#include <string_view>
#include <utility>

#include <Eigen/Core>

#include "dprobust/data.h"
#include "dprobust/estimators.h"

namespace dprobust {

enum class GesMethod {
  kExactFormula,
  kEigenBound,
  kLevelPointwise,
  kLevelSupClamped,
};

std::string_view GesMethodName(GesMethod method);

struct SensitivityConstants {
  double K_n = 0.0;  // sup ||Psi||
  double L_n = 0.0;  // sup ||dPsi/dtheta||
  double C1 = 0.0;
  double C2 = 0.0;
  double b = 0.0;
  double eigen_min_M = 0.0;
  double eigen_max_M = 0.0;
};

struct SensitivityReport {
  double gamma = 0.0;
  GesMethod method = GesMethod::kEigenBound;
  // ||IF(x_i)|| on the fitted sample.
  Eigen::VectorXd if_norms;
  SensitivityConstants constants;
};

// M^{-1} Psi(obs, theta_hat).
Eigen::VectorXd EmpiricalInfluence(const FitResult& fit,
                                   const Eigen::VectorXd& x,
                                   std::optional<double> y = std::nullopt);

// Row i is IF(x_i) for the observations the fit was computed on.
Eigen::MatrixXd SampleInfluence(const FitResult& fit);

// Location and scale reports. Each gamma is the larger of the closed-form
// value and the exact supremum of the joint influence function component.
std::pair<SensitivityReport, SensitivityReport> GesLocationScale(
    const FitResult& fit);

// c * sigma_hat * K / lambda_min(M). K = r0 for the inverse-norm weight.
// Without a weight K is the caller's bound on ||x||; absent that the
// sensitivity is unbounded.
SensitivityReport GesRegressionBound(
    const FitResult& fit, std::optional<double> domain_radius = std::nullopt);

// 2 * c * K / lambda_min(M).
SensitivityReport GesLogisticBound(
    const FitResult& fit, std::optional<double> domain_radius = std::nullopt);

// c / lambda_min(M) for both truncated-score models.
SensitivityReport GesTruncatedBound(const FitResult& fit);

// Dispatch for the vector-valued estimators (not location-scale).
SensitivityReport GesBound(
    const FitResult& fit, std::optional<double> domain_radius = std::nullopt);

// sup_x ||Psi(x, theta_hat)|| as used by the bound for this family.
double ScoreBound(const FitResult& fit,
                  std::optional<double> domain_radius = std::nullopt);

// GES of the tested sub-vector theta_(2): ||(M^{-1})_{(2).}|| * sup ||Psi||.
double SubvectorGes(const FitResult& fit, const RestrictedSpec& r,
                    std::optional<double> domain_radius = std::nullopt);

// Level GES of alpha = 1 - H_k(n ||u||^2) for a whitened vector u with
// GES gamma_u: pointwise 2 n H_k'(n s) sqrt(s) gamma_u, clamped by
// 2 n sup_z{H_k'(n z^2) z} gamma_u.
SensitivityReport LevelGesQuadratic(double statistic, Eigen::Index n, int k,
                                    double gamma_u);

// Wald case: u = V22^{-1/2} T2, gamma_u = ||V22^{-1/2}|| * gamma_T2.
SensitivityReport LevelGesWald(const FitResult& fit, const RestrictedSpec& r,
                               double gamma_T2);

enum class MinNKind { kEstimation, kTesting };

struct MinNConstants {
  double m = 1.0;  // dimension of one observation
  double p = 1.0;  // dimension of theta
  double epsilon = 1.0;
  double delta = 1e-6;
  double K_n = 1.0;
  double L_n = 1.0;
  double b = 1.0;
  double eigen_min_M = 1.0;
  double eigen_max_M = 1.0;
  std::optional<double> C1;  // defaults to L_n
  double C2 = 1.0;
  std::optional<double> C;   // defaults to 1 / sqrt(m log(2/delta))
  double N0 = 0.0;
  // Testing only.
  double C_U = 1.0;
  double C_nkU = 1.0;
};

struct MinNResult {
  double N0 = 0.0;
  double N1 = 0.0;
  double N2 = 0.0;
  double n_required = 0.0;
  bool satisfied = false;
};

MinNResult MinSampleSize(MinNKind kind, const MinNConstants& constants,
                       double n);

// Constants read off a fit: K_n from the score bound, L_n as the largest
// score-derivative norm on the sample (also used for C1 and C2), the
// eigenvalues of M, and b = lambda_min(M). m counts the raw data columns.
MinNConstants DefaultMinNConstants(
    const Dataset& d, const FitResult& fit, double epsilon, double delta,
    std::optional<double> domain_radius = std::nullopt);

// Fills C_U and C_{n,k,U} for a quadratic level functional whose whitening
// matrix has norm whiten_norm. level_gamma is the level GES at the data.
// C_{n,k,U} = 2 n sup_z{H_k'(n z^2) z} Gamma_U / level_gamma with
// Gamma_U = whiten_norm K_n / (b n); infinite when level_gamma is 0.
MinNConstants WithTestingConstants(MinNConstants base, Eigen::Index n, int k,
                                   double whiten_norm, double c_u,
                                   double level_gamma);

}  // namespace dprobust

#endif  // DPROBUST_SENSITIVITY_H_
