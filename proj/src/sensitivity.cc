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

#include "dprobust/sensitivity.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "dprobust/errors.h"
#include "dprobust/linalg.h"
#include "dprobust/numerics.h"

namespace dprobust {
namespace {

void RequireFitted(const FitResult& fit) {
  if (fit.theta_hat.size() == 0 || fit.M_hat.empty()) {
    throw ValidationError("sensitivity: fit has no estimate");
  }
}

SensitivityConstants ConstantsFromM(const FitResult& fit, double k_n) {
  const auto eig = JacobiEigen(fit.M_hat);
  SensitivityConstants out;
  out.K_n = k_n;
  out.eigen_min_M = eig.values(0);
  out.eigen_max_M = eig.values(eig.values.size() - 1);
  out.b = out.eigen_min_M;
  return out;
}

double EigenMinChecked(const FitResult& fit) {
  const double lo = EigenMin(fit.M_hat);
  if (!(lo > 0.0)) {
    throw SensitivityUndefinedError(
        "sensitivity undefined: M is not positive definite");
  }
  return lo;
}

Eigen::VectorXd RowNorms(const Eigen::MatrixXd& a) {
  return a.rowwise().norm();
}

// Bound on w(x) ||x|| over the covariate domain.
double WeightedRadius(const FitResult& fit,
                      std::optional<double> domain_radius) {
  if (domain_radius && !(*domain_radius > 0.0)) {
    throw ValidationError("domain radius must be positive");
  }
  if (fit.cfg.weight == WeightKind::kInverseNorm) {
    return domain_radius ? std::min(fit.cfg.weight_cap, *domain_radius)
                         : fit.cfg.weight_cap;
  }
  if (!domain_radius) {
    throw UnboundedSensitivityError(
        "sensitivity unbounded: unweighted covariates need a domain radius");
  }
  return *domain_radius;
}

double RequireBoundedPsi(const FitResult& fit) {
  const double c = PsiBound(fit.cfg);
  if (!std::isfinite(c)) {
    throw UnboundedSensitivityError(
        "sensitivity unbounded: psi family has no finite bound");
  }
  return c;
}

// sup over r of |a psi(r) + b chi(r) / 2| with chi = psi^2 - kappa.
double LocationScaleComponentSup(double a, double b, double c, double kappa) {
  auto f = [&](double r) {
    const double ps = std::clamp(r, -c, c);
    return std::abs(a * ps + 0.5 * b * (ps * ps - kappa));
  };
  double best = std::max(f(c), f(-c));
  if (b != 0.0) {
    const double vertex = -a / b;
    if (std::abs(vertex) < c) best = std::max(best, f(vertex));
  }
  return best;
}

}  // namespace

std::string_view GesMethodName(GesMethod method) {
  switch (method) {
    case GesMethod::kExactFormula:
      return "exact-formula";
    case GesMethod::kEigenBound:
      return "eigen-bound";
    case GesMethod::kLevelPointwise:
      return "level-pointwise";
    case GesMethod::kLevelSupClamped:
      return "level-sup-clamped";
  }
  return "unknown";
}

Eigen::VectorXd EmpiricalInfluence(const FitResult& fit,
                                   const Eigen::VectorXd& x,
                                   std::optional<double> y) {
  RequireFitted(fit);
  return Solve(fit.M_hat, EstimatingFunction(fit, x, y));
}

Eigen::MatrixXd SampleInfluence(const FitResult& fit) {
  RequireFitted(fit);
  const Eigen::MatrixXd m_inv = Inverse(fit.M_hat).dense();
  return fit.psi_values * m_inv;
}

std::pair<SensitivityReport, SensitivityReport> GesLocationScale(
    const FitResult& fit) {
  RequireFitted(fit);
  if (fit.kind != EstimatorKind::kLocationScale) {
    throw ValidationError("GesLocationScale: fit is not location-scale");
  }
  const double c = RequireBoundedPsi(fit);
  const double sigma = fit.theta_hat(1);
  // M = mean 1{|r| < c} [[1, r], [r, r^2]]: M(0,0) and M(1,1) are the
  // diagonal means the closed forms divide by.
  const double inside = fit.M_hat(0, 0);
  const double inside_r2 = fit.M_hat(1, 1);
  if (!(inside > 0.0) || !(inside_r2 > 0.0)) {
    throw SensitivityUndefinedError(
        "sensitivity undefined: no residuals inside the Huber region");
  }
  const double kappa = FisherKappa(c);
  const Eigen::MatrixXd m_inv = Inverse(fit.M_hat).dense();
  const Eigen::MatrixXd infl = SampleInfluence(fit);
  const double k_n =
      sigma * std::sqrt(std::max(c * c + 0.25 * std::pow(c * c - kappa, 2),
                                 0.25 * kappa * kappa));

  std::array<SensitivityReport, 2> out;
  const std::array<double, 2> closed = {c * sigma / inside,
                                        (c * c - kappa) * sigma / inside_r2};
  for (int j = 0; j < 2; ++j) {
    const double exact =
        sigma * LocationScaleComponentSup(m_inv(j, 0), m_inv(j, 1), c, kappa);
    out[j].gamma = std::max(closed[j], exact);
    out[j].method = GesMethod::kExactFormula;
    out[j].if_norms = infl.col(j).cwiseAbs();
    out[j].constants = ConstantsFromM(fit, k_n);
  }
  return {out[0], out[1]};
}

double ScoreBound(const FitResult& fit, std::optional<double> domain_radius) {
  RequireFitted(fit);
  switch (fit.kind) {
    case EstimatorKind::kLocationScale: {
      const double c = RequireBoundedPsi(fit);
      const double kappa = FisherKappa(c);
      return fit.theta_hat(1) *
             std::sqrt(std::max(c * c + 0.25 * std::pow(c * c - kappa, 2),
                                0.25 * kappa * kappa));
    }
    case EstimatorKind::kMallows: {
      const double c = RequireBoundedPsi(fit);
      return c * *fit.sigma_hat * WeightedRadius(fit, domain_radius);
    }
    case EstimatorKind::kLogistic: {
      const double c = RequireBoundedPsi(fit);
      return 2.0 * c * WeightedRadius(fit, domain_radius);
    }
    case EstimatorKind::kTruncatedGaussianMean:
    case EstimatorKind::kTruncatedRegression:
      return fit.cfg.c;
  }
  throw ValidationError("ScoreBound: unknown estimator kind");
}

namespace {

SensitivityReport EigenBoundReport(const FitResult& fit, double k_n) {
  SensitivityReport out;
  out.constants = ConstantsFromM(fit, k_n);
  if (!(out.constants.eigen_min_M > 0.0)) {
    throw SensitivityUndefinedError(
        "sensitivity undefined: M is not positive definite");
  }
  out.gamma = k_n / out.constants.eigen_min_M;
  out.method = GesMethod::kEigenBound;
  out.if_norms = RowNorms(SampleInfluence(fit));
  return out;
}

}  // namespace

SensitivityReport GesRegressionBound(const FitResult& fit,
                                     std::optional<double> domain_radius) {
  RequireFitted(fit);
  if (fit.kind != EstimatorKind::kMallows) {
    throw ValidationError("GesRegressionBound: fit is not a regression");
  }
  return EigenBoundReport(fit, ScoreBound(fit, domain_radius));
}

SensitivityReport GesLogisticBound(const FitResult& fit,
                                   std::optional<double> domain_radius) {
  RequireFitted(fit);
  if (fit.kind != EstimatorKind::kLogistic) {
    throw ValidationError("GesLogisticBound: fit is not logistic");
  }
  return EigenBoundReport(fit, ScoreBound(fit, domain_radius));
}

SensitivityReport GesTruncatedBound(const FitResult& fit) {
  RequireFitted(fit);
  if (fit.kind != EstimatorKind::kTruncatedGaussianMean &&
      fit.kind != EstimatorKind::kTruncatedRegression) {
    throw ValidationError("GesTruncatedBound: fit is not truncated-score");
  }
  return EigenBoundReport(fit, ScoreBound(fit));
}

SensitivityReport GesBound(const FitResult& fit,
                           std::optional<double> domain_radius) {
  switch (fit.kind) {
    case EstimatorKind::kMallows:
      return GesRegressionBound(fit, domain_radius);
    case EstimatorKind::kLogistic:
      return GesLogisticBound(fit, domain_radius);
    case EstimatorKind::kTruncatedGaussianMean:
    case EstimatorKind::kTruncatedRegression:
      return GesTruncatedBound(fit);
    case EstimatorKind::kLocationScale:
      break;
  }
  throw ValidationError("GesBound: use GesLocationScale for location-scale");
}

double SubvectorGes(const FitResult& fit, const RestrictedSpec& r,
                    std::optional<double> domain_radius) {
  RequireFitted(fit);
  if (fit.kind == EstimatorKind::kLocationScale ||
      fit.kind == EstimatorKind::kTruncatedGaussianMean) {
    throw ValidationError("SubvectorGes: model has no testable coefficients");
  }
  ValidateRestriction(r, fit.p(), fit.intercept_added);
  EigenMinChecked(fit);
  const Eigen::MatrixXd m_inv = Inverse(fit.M_hat).dense();
  Eigen::MatrixXd rows(r.k(), fit.p());
  for (Eigen::Index i = 0; i < r.k(); ++i) {
    rows.row(i) = m_inv.row(r.tested_indices[i]);
  }
  return OperatorNorm(rows) * ScoreBound(fit, domain_radius);
}

SensitivityReport LevelGesQuadratic(double statistic, Eigen::Index n, int k,
                                    double gamma_u) {
  if (!(statistic >= 0.0) || !std::isfinite(statistic)) {
    throw ValidationError("level sensitivity: statistic must be finite, >= 0");
  }
  if (n < 1 || k < 1) {
    throw ValidationError("level sensitivity: n and k must be positive");
  }
  if (!(gamma_u >= 0.0) || !std::isfinite(gamma_u)) {
    throw ValidationError("level sensitivity: gamma must be finite, >= 0");
  }
  const double nd = static_cast<double>(n);
  SensitivityReport out;
  const double clamp = 2.0 * nd * ChiSquaredSupBound(k, nd) * gamma_u;
  double pointwise = std::numeric_limits<double>::quiet_NaN();
  if (!(k == 1 && statistic == 0.0)) {
    pointwise = 2.0 * nd * ChiSquaredPdf(k, nd * statistic) *
                std::sqrt(statistic) * gamma_u;
  }
  if (std::isfinite(pointwise) && pointwise <= clamp) {
    out.gamma = pointwise;
    out.method = GesMethod::kLevelPointwise;
  } else {
    out.gamma = clamp;
    out.method = GesMethod::kLevelSupClamped;
  }
  out.constants.K_n = gamma_u;
  return out;
}

SensitivityReport LevelGesWald(const FitResult& fit, const RestrictedSpec& r,
                               double gamma_T2) {
  RequireFitted(fit);
  ValidateRestriction(r, fit.p(), fit.intercept_added);
  const SymMatrixd v22 = fit.V_hat.Block(r.tested_indices);
  Eigen::VectorXd t2(r.k());
  for (Eigen::Index i = 0; i < r.k(); ++i) {
    t2(i) = fit.theta_hat(r.tested_indices[i]);
  }
  const SymMatrixd whiten = InverseSqrtPsd(v22);
  const Eigen::VectorXd u = whiten.dense() * t2;
  SensitivityReport out = LevelGesQuadratic(
      u.squaredNorm(), fit.n(), static_cast<int>(r.k()),
      OperatorNorm(whiten) * gamma_T2);
  const SensitivityConstants level = out.constants;
  out.constants = ConstantsFromM(fit, level.K_n);
  return out;
}

MinNResult MinSampleSize(MinNKind kind, const MinNConstants& k, double n) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ValidationError(std::string("min-n: ") + name +
                            " must be positive and finite");
    }
  };
  positive(k.m, "m");
  positive(k.p, "p");
  positive(k.epsilon, "epsilon");
  if (!(k.delta > 0.0 && k.delta < 1.0)) {
    throw ValidationError("min-n: delta must lie in (0, 1)");
  }
  positive(k.K_n, "K_n");
  positive(k.L_n, "L_n");
  positive(k.b, "b");
  positive(k.eigen_min_M, "lambda_min(M)");
  positive(k.eigen_max_M, "lambda_max(M)");
  if (k.eigen_max_M < k.eigen_min_M) {
    throw ValidationError("min-n: lambda_max(M) below lambda_min(M)");
  }
  const double c1 = k.C1.value_or(k.L_n);
  positive(c1, "C1");
  if (!(k.C2 >= 0.0) || !std::isfinite(k.C2)) {
    throw ValidationError("min-n: C2 must be finite and non-negative");
  }
  if (!(k.N0 >= 0.0)) throw ValidationError("min-n: N0 must be >= 0");

  const double log2d = std::log(2.0 / k.delta);
  const double c = k.C.value_or(1.0 / std::sqrt(k.m * log2d));
  positive(c, "C");
  // C2 K / b enters through the ridge-free substitution 2 C2 K / lambda_min.
  const double lipschitz =
      (c1 + 2.0 * k.C2 * k.K_n / k.eigen_min_M) / k.eigen_min_M;

  MinNResult out;
  out.N0 = k.N0;
  double log_term = 0.0;
  if (kind == MinNKind::kEstimation) {
    log_term = std::log(k.eigen_max_M / k.b);
    out.N2 = 4.0 * c * c * k.m * log2d *
             std::pow(2.0 * k.L_n / k.b + lipschitz, 2);
  } else {
    positive(k.C_U, "C_U");
    if (!(k.C_nkU > 0.0)) {
      throw ValidationError("min-n: C_{n,k,U} must be positive");
    }
    log_term = std::log(k.C_nkU);
    out.N2 = k.C_U * k.C_U * k.m * std::log(1.0 / k.delta) * k.K_n * k.K_n /
             k.eigen_max_M *
             std::pow(1.0 + 2.0 * k.L_n / k.b + lipschitz, 2);
  }
  const double lead =
      1.0 + 4.0 / k.epsilon * (k.p + 2.0 * log2d) * std::max(0.0, log_term);
  out.N1 = lead * lead / (c * c * k.m * log2d);
  out.n_required = std::max({out.N0, out.N1, out.N2});
  out.satisfied = n >= out.n_required;
  return out;
}

MinNConstants DefaultMinNConstants(const Dataset& d, const FitResult& fit,
                                   double epsilon, double delta,
                                   std::optional<double> domain_radius) {
  RequireFitted(fit);
  MinNConstants out;
  out.m = static_cast<double>(d.m() - (d.intercept_added() ? 1 : 0) +
                              (d.has_response() ? 1 : 0));
  out.p = static_cast<double>(fit.p());
  out.epsilon = epsilon;
  out.delta = delta;
  out.K_n = ScoreBound(fit, domain_radius);
  const SensitivityConstants eig = ConstantsFromM(fit, out.K_n);
  out.eigen_min_M = eig.eigen_min_M;
  out.eigen_max_M = eig.eigen_max_M;
  out.b = fit.ridge_applied ? 1.0 / static_cast<double>(fit.n())
                            : eig.eigen_min_M;

  // Largest ||d Psi / d theta|| on the sample.
  double l_n = 0.0;
  switch (fit.kind) {
    case EstimatorKind::kLocationScale:
      l_n = 1.0 + fit.cfg.c * fit.cfg.c;
      break;
    case EstimatorKind::kTruncatedGaussianMean:
      l_n = 1.0;
      break;
    case EstimatorKind::kMallows:
    case EstimatorKind::kLogistic:
    case EstimatorKind::kTruncatedRegression:
      for (Eigen::Index i = 0; i < d.n(); ++i) {
        const Eigen::VectorXd row = d.x().row(i).transpose();
        const double w = fit.kind == EstimatorKind::kTruncatedRegression
                             ? 1.0
                             : CovariateWeight(fit.cfg, row);
        l_n = std::max(l_n, w * row.squaredNorm());
      }
      break;
  }
  out.L_n = l_n;
  out.C1 = l_n;
  out.C2 = l_n;
  return out;
}

MinNConstants WithTestingConstants(MinNConstants base, Eigen::Index n, int k,
                                   double whiten_norm, double c_u,
                                   double level_gamma) {
  if (n < 1 || k < 1) {
    throw ValidationError("testing constants: n and k must be positive");
  }
  if (!(level_gamma >= 0.0)) {
    throw ValidationError("testing constants: level GES must be >= 0");
  }
  const double nd = static_cast<double>(n);
  const double gamma_u = whiten_norm * base.K_n / (base.b * nd);
  base.C_U = c_u;
  // A vanishing level GES leaves no finite requirement.
  base.C_nkU = level_gamma > 0.0
                   ? 2.0 * nd * ChiSquaredSupBound(k, nd) * gamma_u /
                         level_gamma
                   : std::numeric_limits<double>::infinity();
  return base;
}

}  // namespace dprobust
