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

// Robust M-estimators: Huber primitives, Proposal-2 location-scale, Mallows
// regression, robust quasilikelihood logistic regression and truncated-score
// maximum likelihood, each optionally restricted to a coefficient subset.

#ifndef DPROBUST_ESTIMATORS_H_
#define DPROBUST_ESTIMATORS_H_

#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "dprobust/data.h"
#include "dprobust/linalg.h"

namespace dprobust {

enum class PsiFamily { kHuber, kIdentity };
enum class WeightKind { kNone, kInverseNorm };

struct PsiConfig {
  PsiFamily family = PsiFamily::kHuber;
  double c = 1.345;
  WeightKind weight = WeightKind::kNone;
  // r0 in w(x) = min{1, r0 / ||x||}.
  double weight_cap = 2.0;

  void Validate() const;
};

struct HuberValues {
  double psi;
  double psi_prime;
  double rho;
  double chi;
};

HuberValues HuberPrimitives(double r, double c);
double HuberPsi(double r, double c);
// Defined as 0 on the kink |r| = c.
double HuberPsiPrime(double r, double c);
double HuberRho(double r, double c);

// E[min(c^2, X^2)] for standard normal X.
double FisherKappa(double c);

// psi, psi' and rho for the configured family. Identity ignores c.
double Psi(const PsiConfig& cfg, double r);
double PsiPrime(const PsiConfig& cfg, double r);
double Rho(const PsiConfig& cfg, double r);
// Sup of |psi|; infinite for the identity family.
double PsiBound(const PsiConfig& cfg);

// w(x) over the full design row, intercept included.
double CovariateWeight(const PsiConfig& cfg, const Eigen::VectorXd& x);

enum class EstimatorKind {
  kLocationScale,
  kMallows,
  kLogistic,
  kTruncatedGaussianMean,
  kTruncatedRegression,
};

std::string_view EstimatorKindName(EstimatorKind kind);

// Components of theta constrained to zero. Indices are 0-based positions in
// theta; position 0 is the intercept when the design carries one.
struct RestrictedSpec {
  std::vector<Eigen::Index> tested_indices;

  Eigen::Index k() const {
    return static_cast<Eigen::Index>(tested_indices.size());
  }
};

struct FitOptions {
  // Per-observation weights of the empirical distribution; empty means 1/n.
  // Used for contaminated mixtures (1 - t) F_n + t Delta_x.
  Eigen::VectorXd observation_weights;
  // Regression only: hold sigma at this value instead of estimating it.
  std::optional<double> fixed_sigma;
  // Add tau = 1/n to M when its eigenvalue floor check fails.
  bool ridge = false;
  int max_iterations = 500;
  double tolerance = 1e-10;
};

struct FitResult {
  EstimatorKind kind = EstimatorKind::kMallows;
  PsiConfig cfg;
  Eigen::VectorXd theta_hat;
  std::optional<double> sigma_hat;
  // Minus the mean Jacobian of Psi at theta_hat.
  SymMatrixd M_hat;
  // Mean of Psi Psi^T.
  SymMatrixd Q_hat;
  // M^{-1} Q M^{-1}.
  SymMatrixd V_hat;
  Eigen::VectorXd residuals;
  // Row i is Psi(x_i, theta_hat).
  Eigen::MatrixXd psi_values;
  bool converged = false;
  int iterations = 0;
  // ||sum_i w_i Psi(x_i, theta_hat)|| over the free components.
  double equation_residual = 0.0;
  bool ridge_applied = false;
  // Empty for unrestricted fits.
  std::vector<Eigen::Index> tested_indices;
  bool intercept_added = false;

  Eigen::Index n() const { return residuals.size(); }
  Eigen::Index p() const { return theta_hat.size(); }
  std::vector<Eigen::Index> FreeIndices() const;
};

FitResult FitLocationScale(const Dataset& d, const PsiConfig& cfg,
                           const FitOptions& options = {});
FitResult FitMallows(const Dataset& d, const PsiConfig& cfg,
                     const FitOptions& options = {});
FitResult FitRobustLogistic(const Dataset& d, const PsiConfig& cfg,
                            const FitOptions& options = {});
// Truncation level is cfg.c; family and weight are ignored.
FitResult FitTruncatedMle(const Dataset& d, EstimatorKind model,
                          const PsiConfig& cfg,
                          const FitOptions& options = {});

// Fits with the tested components of theta pinned at zero. An empty spec is
// the unrestricted fit. Location-scale and the truncated Gaussian mean have
// no restrictable coefficients.
FitResult FitRestricted(const Dataset& d, EstimatorKind kind,
                        const PsiConfig& cfg, const RestrictedSpec& r,
                        const FitOptions& options = {});

// Dispatches on kind; equivalent to FitRestricted with an empty spec.
FitResult Fit(const Dataset& d, EstimatorKind kind, const PsiConfig& cfg,
              const FitOptions& options = {});

void ValidateRestriction(const RestrictedSpec& r, Eigen::Index p,
                         bool intercept_added);

// Psi(x, theta_hat) for one observation, at the fit's nuisance scale.
// Location-scale and truncated Gaussian mean read x(0); y is required for
// the regression kinds.
Eigen::VectorXd EstimatingFunction(const FitResult& fit,
                                   const Eigen::VectorXd& x,
                                   std::optional<double> y = std::nullopt);

// Sum of rho over observations at theta (regression kinds only), using the
// fit's sigma. Used by the likelihood-ratio-type statistic.
double LossAt(const Dataset& d, const FitResult& fit,
              const Eigen::VectorXd& theta);

}  // namespace dprobust

#endif  // DPROBUST_ESTIMATORS_H_
