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
#include <limits>
#include <string>

#include "dprobust/errors.h"
#include "dprobust/linalg.h"
#include "dprobust/numerics.h"

namespace dprobust {
namespace {

std::vector<Eigen::Index> Complement(const std::vector<Eigen::Index>& idx,
                                     Eigen::Index p) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (std::find(idx.begin(), idx.end(), j) == idx.end()) out.push_back(j);
  }
  return out;
}

Eigen::MatrixXd Sub(const Eigen::MatrixXd& a,
                    const std::vector<Eigen::Index>& rows,
                    const std::vector<Eigen::Index>& cols) {
  Eigen::MatrixXd out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = a(rows[i], cols[j]);
  }
  return out;
}

Eigen::VectorXd Tested(const Eigen::VectorXd& v, const RestrictedSpec& r) {
  Eigen::VectorXd out(r.k());
  for (Eigen::Index i = 0; i < r.k(); ++i) out(i) = v(r.tested_indices[i]);
  return out;
}

void RequireTestable(const FitResult& fit, const RestrictedSpec& r) {
  if (fit.kind == EstimatorKind::kLocationScale ||
      fit.kind == EstimatorKind::kTruncatedGaussianMean) {
    throw ValidationError("test: model has no testable coefficients");
  }
  if (r.k() == 0) throw ValidationError("test: no coefficients under test");
  ValidateRestriction(r, fit.p(), fit.intercept_added);
}

// M22.1 = M22 - M21 M11^{-1} M12 and the block [-M21 M11^{-1}, I].
struct Schur {
  SymMatrixd m22_1;
  Eigen::MatrixXd projector;  // k x p, columns in theta order
};

Schur SchurComplement(const SymMatrixd& m, const RestrictedSpec& r) {
  const Eigen::Index p = m.dim();
  const auto free = Complement(r.tested_indices, p);
  const Eigen::MatrixXd& a = m.dense();
  const SymMatrixd m11(Sub(a, free, free));
  const Eigen::MatrixXd m21 = Sub(a, r.tested_indices, free);
  // m21 M11^{-1}, via the symmetric solve on the transpose.
  Eigen::MatrixXd g(m21.rows(), m21.cols());
  for (Eigen::Index i = 0; i < m21.rows(); ++i) {
    g.row(i) = Solve(m11, Eigen::VectorXd(m21.row(i).transpose())).transpose();
  }
  Schur out;
  out.m22_1 = SymMatrixd(Sub(a, r.tested_indices, r.tested_indices) -
                         g * Sub(a, free, r.tested_indices));
  out.projector = Eigen::MatrixXd::Zero(r.k(), p);
  for (std::size_t j = 0; j < free.size(); ++j) {
    out.projector.col(free[j]) = -g.col(j);
  }
  for (Eigen::Index i = 0; i < r.k(); ++i) {
    out.projector(i, r.tested_indices[i]) = 1.0;
  }
  return out;
}

// Hessian of the mean loss per unit of M: M / sigma^2 for regression.
double LossScale(const FitResult& fit) {
  const double s = fit.sigma_hat.value_or(1.0);
  return 1.0 / (s * s);
}

struct Statistic {
  double value = 0.0;
  double gamma_u = 0.0;
  double whiten_norm = 0.0;
  double c_u = 0.0;
};

}  // namespace

std::string_view TestKindName(TestKind kind) {
  switch (kind) {
    case TestKind::kWald:
      return "wald";
    case TestKind::kScore:
      return "score";
    case TestKind::kLr:
      return "lr";
  }
  return "unknown";
}

TestKind ParseTestKind(std::string_view name) {
  if (name == "wald") return TestKind::kWald;
  if (name == "score") return TestKind::kScore;
  if (name == "lr") return TestKind::kLr;
  throw ValidationError("unknown test kind '" + std::string(name) + "'");
}

std::string_view QuantileModeName(QuantileMode mode) {
  return mode == QuantileMode::kCorrected ? "corrected" : "paper-literal";
}

QuantileMode ParseQuantileMode(std::string_view name) {
  if (name == "corrected") return QuantileMode::kCorrected;
  if (name == "paper-literal") return QuantileMode::kPaperLiteral;
  throw ValidationError("unknown quantile mode '" + std::string(name) + "'");
}

double WaldStatistic(const FitResult& fit, const RestrictedSpec& r) {
  RequireTestable(fit, r);
  const SymMatrixd v22 = fit.V_hat.Block(r.tested_indices);
  const Eigen::VectorXd t2 = Tested(fit.theta_hat, r);
  try {
    return std::max(0.0, t2.dot(Solve(v22, t2)));
  } catch (const RegularityError&) {
    throw RegularityError("regularity check failed: V22 is singular");
  }
}

double ScoreStatistic(const FitResult& fit_restricted,
                      const FitResult& fit_full, const RestrictedSpec& r) {
  RequireTestable(fit_full, r);
  if (fit_restricted.tested_indices != r.tested_indices) {
    throw ValidationError("score: restricted fit does not match the restriction");
  }
  const Schur s = SchurComplement(fit_full.M_hat, r);
  const Eigen::MatrixXd v22 = fit_full.V_hat.Block(r.tested_indices).dense();
  const SymMatrixd u(s.m22_1.dense() * v22 * s.m22_1.dense().transpose());
  Eigen::VectorXd z(r.k());
  for (Eigen::Index i = 0; i < r.k(); ++i) {
    z(i) = fit_restricted.psi_values.col(r.tested_indices[i]).mean();
  }
  return std::max(0.0, z.dot(Solve(u, z)));
}

LrStatistics LrStatistic(const Dataset& d, const FitResult& fit_full,
                         const FitResult& fit_restricted) {
  if (fit_full.kind != EstimatorKind::kMallows ||
      fit_restricted.kind != EstimatorKind::kMallows) {
    throw ValidationError("likelihood-ratio test needs regression fits");
  }
  if (fit_full.cfg.family != fit_restricted.cfg.family ||
      fit_full.cfg.c != fit_restricted.cfg.c ||
      fit_full.cfg.weight != fit_restricted.cfg.weight) {
    throw ValidationError("likelihood-ratio test: fits use different psi");
  }
  const RestrictedSpec r{fit_restricted.tested_indices};
  RequireTestable(fit_full, r);
  LrStatistics out;
  out.S = 2.0 * (LossAt(d, fit_full, fit_full.theta_hat) -
                 LossAt(d, fit_full, fit_restricted.theta_hat));
  const Schur s = SchurComplement(fit_full.M_hat, r);
  const Eigen::VectorXd t2 = Tested(fit_full.theta_hat, r);
  out.S_tilde = std::max(0.0, LossScale(fit_full) *
                                  t2.dot(s.m22_1.dense() * t2));
  return out;
}

double LevelFunctional(double statistic, Eigen::Index n, int k) {
  if (!(statistic >= 0.0)) {
    throw ValidationError("level: statistic must be non-negative");
  }
  if (n < 1 || k < 1) throw ValidationError("level: n and k must be positive");
  return ChiSquaredSurvival(k, static_cast<double>(n) * statistic);
}

double RecoverQuantile(double pvalue, int k, QuantileMode mode) {
  if (!(pvalue >= 0.0 && pvalue <= 1.0)) {
    throw ValidationError("quantile: p-value must lie in [0, 1]");
  }
  try {
    return mode == QuantileMode::kCorrected
               ? ChiSquaredSurvivalQuantile(k, pvalue)
               : ChiSquaredQuantile(k, pvalue);
  } catch (const UnboundedInputError&) {
    return std::numeric_limits<double>::infinity();
  }
}

std::pair<double, double> DpConfidenceInterval(const DPRelease& pvalue, int k,
                                               QuantileMode mode) {
  if (k != 1) {
    throw UnsupportedDimensionError(
        "confidence interval needs a single tested coefficient (k = " +
        std::to_string(k) + ")");
  }
  if (pvalue.value.size() != 1) {
    throw ValidationError("confidence interval: release is not a p-value");
  }
  const double half = std::sqrt(RecoverQuantile(pvalue.value(0), k, mode));
  return {-half, half};
}

TestResult DpTest(const Dataset& d, EstimatorKind model, const PsiConfig& cfg,
                  const RestrictedSpec& r, TestKind kind,
                  const PrivacyParams& params, std::uint64_t seed,
                  QuantileMode mode, const TestOptions& options) {
  params.Validate();
  const FitResult full = Fit(d, model, cfg, options.fit);
  RequireTestable(full, r);
  const Eigen::Index n = full.n();
  const int k = static_cast<int>(r.k());

  Statistic st;
  switch (kind) {
    case TestKind::kWald: {
      st.value = WaldStatistic(full, r);
      const SymMatrixd v22 = full.V_hat.Block(r.tested_indices);
      st.whiten_norm = OperatorNorm(InverseSqrtPsd(v22));
      st.c_u = 2.0 * st.whiten_norm * st.whiten_norm;
      st.gamma_u =
          st.whiten_norm * SubvectorGes(full, r, options.domain_radius);
      break;
    }
    case TestKind::kScore: {
      const FitResult restricted = FitRestricted(d, model, cfg, r, options.fit);
      st.value = ScoreStatistic(restricted, full, r);
      const Schur s_full = SchurComplement(full.M_hat, r);
      const Eigen::MatrixXd v22 = full.V_hat.Block(r.tested_indices).dense();
      const SymMatrixd u(s_full.m22_1.dense() * v22 *
                         s_full.m22_1.dense().transpose());
      const Schur s_r = SchurComplement(restricted.M_hat, r);
      const double gamma_z = OperatorNorm(s_r.projector) *
                             ScoreBound(restricted, options.domain_radius);
      st.whiten_norm = OperatorNorm(InverseSqrtPsd(u));
      st.gamma_u = st.whiten_norm * gamma_z;
      break;
    }
    case TestKind::kLr: {
      const FitResult restricted = FitRestricted(d, model, cfg, r, options.fit);
      st.value = LrStatistic(d, full, restricted).S_tilde;
      const Schur s = SchurComplement(full.M_hat, r);
      const SymMatrixd h(LossScale(full) * s.m22_1.dense());
      st.whiten_norm = OperatorNorm(SqrtPsd(h));
      st.c_u = 2.0 * EigenMax(h);
      st.gamma_u =
          st.whiten_norm * SubvectorGes(full, r, options.domain_radius);
      break;
    }
  }

  TestResult out;
  out.kind = kind;
  out.statistic = st.value;
  out.k = k;
  out.n = n;
  out.mode = mode;
  out.alpha_hat = LevelFunctional(st.value, n, k);
  out.level_report = LevelGesQuadratic(st.value, n, k, st.gamma_u);
  if (options.level_gamma_override) {
    out.level_report.gamma = *options.level_gamma_override;
  }

  MinNConstants base =
      DefaultMinNConstants(d, full, params.epsilon, params.delta,
                           options.domain_radius);
  if (kind == TestKind::kScore) st.c_u = base.L_n;
  ReleaseOptions release;
  release.min_n_constants =
      WithTestingConstants(base, n, k, st.whiten_norm, st.c_u,
                           out.level_report.gamma);
  release.min_n_kind = MinNKind::kTesting;
  release.strict_min_n = options.strict_min_n;
  release.ledger = options.ledger;
  release.label = std::string(TestKindName(kind)) + " p-value";
  out.dp_pvalue =
      ReleasePValue(out.alpha_hat, out.level_report, n, params, seed, release);
  out.q_recovered = RecoverQuantile(out.dp_pvalue.value(0), k, mode);
  if (k == 1) out.ci = DpConfidenceInterval(out.dp_pvalue, k, mode);
  return out;
}

}  // namespace dprobust
