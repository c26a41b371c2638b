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

#include "dprobust/estimators.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "dprobust/errors.h"
#include "dprobust/numerics.h"

namespace dprobust {

void PsiConfig::Validate() const {
  if (!(c > 0.0) || std::isnan(c)) {
    throw ValidationError("psi config: c must be > 0");
  }
  if (weight == WeightKind::kInverseNorm && !(weight_cap > 0.0)) {
    throw ValidationError("psi config: weight cap must be > 0");
  }
}

HuberValues HuberPrimitives(double r, double c) {
  return {HuberPsi(r, c), HuberPsiPrime(r, c), HuberRho(r, c),
          HuberPsi(r, c) * HuberPsi(r, c) - FisherKappa(c)};
}

double HuberPsi(double r, double c) { return std::clamp(r, -c, c); }

double HuberPsiPrime(double r, double c) {
  return std::abs(r) < c ? 1.0 : 0.0;
}

double HuberRho(double r, double c) {
  const double a = std::abs(r);
  return a <= c ? 0.5 * r * r : c * a - 0.5 * c * c;
}

double FisherKappa(double c) {
  if (!(c > 0.0)) throw ValidationError("FisherKappa: c must be > 0");
  if (std::isinf(c)) return 1.0;
  const double upper = NormalCdf(-c);
  return 2.0 * c * c * upper + (1.0 - 2.0 * upper) - 2.0 * c * NormalPdf(c);
}

double Psi(const PsiConfig& cfg, double r) {
  return cfg.family == PsiFamily::kHuber ? HuberPsi(r, cfg.c) : r;
}

double PsiPrime(const PsiConfig& cfg, double r) {
  return cfg.family == PsiFamily::kHuber ? HuberPsiPrime(r, cfg.c) : 1.0;
}

double Rho(const PsiConfig& cfg, double r) {
  return cfg.family == PsiFamily::kHuber ? HuberRho(r, cfg.c) : 0.5 * r * r;
}

double PsiBound(const PsiConfig& cfg) {
  return cfg.family == PsiFamily::kHuber
             ? cfg.c
             : std::numeric_limits<double>::infinity();
}

double CovariateWeight(const PsiConfig& cfg, const Eigen::VectorXd& x) {
  if (cfg.weight == WeightKind::kNone) return 1.0;
  const double norm = x.norm();
  return norm <= cfg.weight_cap ? 1.0 : cfg.weight_cap / norm;
}

std::string_view EstimatorKindName(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kLocationScale:
      return "location-scale";
    case EstimatorKind::kMallows:
      return "regression";
    case EstimatorKind::kLogistic:
      return "logistic";
    case EstimatorKind::kTruncatedGaussianMean:
      return "truncated-mle-gaussian-mean";
    case EstimatorKind::kTruncatedRegression:
      return "truncated-mle-regression";
  }
  return "unknown";
}

std::vector<Eigen::Index> FitResult::FreeIndices() const {
  std::vector<Eigen::Index> free;
  for (Eigen::Index j = 0; j < p(); ++j) {
    if (std::find(tested_indices.begin(), tested_indices.end(), j) ==
        tested_indices.end()) {
      free.push_back(j);
    }
  }
  return free;
}

void ValidateRestriction(const RestrictedSpec& r, Eigen::Index p,
                         bool intercept_added) {
  std::vector<Eigen::Index> sorted = r.tested_indices;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ValidationError("restriction: tested indices must be distinct");
  }
  for (Eigen::Index j : sorted) {
    if (j < 0 || j >= p) {
      throw ValidationError("restriction: tested index " + std::to_string(j) +
                            " out of range");
    }
    if (intercept_added && j == 0) {
      throw ValidationError("restriction: the intercept cannot be tested");
    }
  }
  if (r.k() >= p) {
    throw ValidationError("restriction: at least one coefficient must be free");
  }
}

namespace {

double Kappa(const PsiConfig& cfg) {
  return cfg.family == PsiFamily::kHuber ? FisherKappa(cfg.c) : 1.0;
}

Eigen::VectorXd ObservationWeights(const FitOptions& options, Eigen::Index n) {
  if (options.observation_weights.size() == 0) {
    return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  }
  if (options.observation_weights.size() != n) {
    throw ValidationError("observation weights have the wrong length");
  }
  if ((options.observation_weights.array() < 0.0).any() ||
      !options.observation_weights.allFinite()) {
    throw ValidationError("observation weights must be finite and >= 0");
  }
  const double total = options.observation_weights.sum();
  if (!(total > 0.0)) throw ValidationError("observation weights sum to 0");
  return options.observation_weights / total;
}

Eigen::MatrixXd Columns(const Eigen::MatrixXd& x,
                        const std::vector<Eigen::Index>& cols) {
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(j) = x.col(cols[j]);
  return out;
}

std::vector<Eigen::Index> Complement(const std::vector<Eigen::Index>& tested,
                                     Eigen::Index p) {
  std::vector<Eigen::Index> free;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (std::find(tested.begin(), tested.end(), j) == tested.end()) {
      free.push_back(j);
    }
  }
  return free;
}

// Weighted Gram matrix of the free columns; RegularityError when singular.
void RequireFullRank(const Eigen::MatrixXd& x, const Eigen::VectorXd& w) {
  const Eigen::MatrixXd gram = x.transpose() * w.asDiagonal() * x;
  const auto eig = JacobiEigen(SymMatrixd(gram));
  const double hi = eig.values(eig.values.size() - 1);
  if (!(hi > 0.0) || !(eig.values(0) > kSingularityTolerance * hi)) {
    throw RegularityError(
        "regularity check failed: design matrix is rank deficient");
  }
}

Eigen::VectorXd WeightedLeastSquares(const Eigen::MatrixXd& x,
                                     const Eigen::VectorXd& y,
                                     const Eigen::VectorXd& w) {
  const Eigen::MatrixXd xtw = x.transpose() * w.asDiagonal();
  return (xtw * x).ldlt().solve(xtw * y);
}

double Median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + mid));
  }
  return m;
}

double Mad(const Eigen::VectorXd& e) {
  std::vector<double> v(e.data(), e.data() + e.size());
  const double med = Median(v);
  for (double& x : v) x = std::abs(x - med);
  return 1.4826 * Median(v);
}

// Adds the ridge or throws when M fails the eigenvalue floor.
SymMatrixd CheckedM(const Eigen::MatrixXd& m, const FitOptions& options,
                    Eigen::Index n, bool& ridge_applied) {
  SymMatrixd sym(m);
  const auto eig = JacobiEigen(sym);
  const double hi = eig.values(eig.values.size() - 1);
  if (hi > 0.0 && eig.values(0) > kSingularityTolerance * hi) return sym;
  if (!options.ridge) {
    throw RegularityError(
        "regularity check failed: M is singular (smallest eigenvalue " +
        std::to_string(eig.values(0)) + ")");
  }
  ridge_applied = true;
  return SymMatrixd(m + Eigen::MatrixXd::Identity(m.rows(), m.cols()) /
                            static_cast<double>(n));
}

void Finalize(FitResult& fit, const Eigen::MatrixXd& m,
              const Eigen::VectorXd& omega, const FitOptions& options) {
  fit.M_hat = CheckedM(m, options, omega.size(), fit.ridge_applied);
  fit.Q_hat = SymMatrixd(fit.psi_values.transpose() * omega.asDiagonal() *
                         fit.psi_values);
  const SymMatrixd m_inv = Inverse(fit.M_hat);
  fit.V_hat = SymMatrixd(m_inv.dense() * fit.Q_hat.dense() * m_inv.dense());
  Eigen::VectorXd mean = fit.psi_values.transpose() * omega;
  double sq = 0.0;
  for (Eigen::Index j : fit.FreeIndices()) sq += mean(j) * mean(j);
  if (fit.kind == EstimatorKind::kLocationScale) sq = mean.squaredNorm();
  fit.equation_residual = std::sqrt(sq);
  fit.converged = true;
}

// ---------------------------------------------------------------------------
// Huber-type regression with joint Proposal-2 scale. Location-scale is the
// intercept-only case.

struct ScaleRegression {
  Eigen::VectorXd beta;  // full length, tested entries zero
  double sigma;
  int iterations;
};

ScaleRegression SolveScaleRegression(const Eigen::MatrixXd& x,
                                     const Eigen::VectorXd& y,
                                     const Eigen::VectorXd& wx,
                                     const Eigen::VectorXd& omega,
                                     const PsiConfig& cfg,
                                     const std::vector<Eigen::Index>& free,
                                     const FitOptions& options) {
  const Eigen::Index nf = static_cast<Eigen::Index>(free.size());
  const Eigen::MatrixXd xf = Columns(x, free);
  RequireFullRank(xf, omega.cwiseProduct(wx));
  const double kappa = Kappa(cfg);
  const double tol = options.tolerance;

  Eigen::VectorXd b = WeightedLeastSquares(xf, y, omega);
  Eigen::VectorXd e = y - xf * b;
  double sigma = 0.0;
  if (options.fixed_sigma) {
    sigma = *options.fixed_sigma;
    if (!(sigma > 0.0)) throw ValidationError("fixed sigma must be > 0");
  } else {
    sigma = Mad(e);
    // Residuals at rounding level count as an exact fit.
    if (!(sigma > 1e-13 * y.cwiseAbs().maxCoeff())) {
      throw DegenerateScaleError(
          "degenerate scale: median absolute deviation of residuals is 0");
    }
  }
  const double wsum = omega.dot(wx);

  auto full_beta = [&](const Eigen::VectorXd& bf) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(x.cols());
    for (Eigen::Index j = 0; j < nf; ++j) out(free[j]) = bf(j);
    return out;
  };
  auto last_iterate = [&]() {
    Eigen::VectorXd v(nf + 1);
    v << b, sigma;
    return v;
  };

  int it = 0;
  bool done = false;
  for (; it < options.max_iterations && !done; ++it) {
    Eigen::VectorXd u(e.size());
    for (Eigen::Index i = 0; i < e.size(); ++i) {
      const double r = e(i) / sigma;
      const double ratio = r == 0.0 ? 1.0 : Psi(cfg, r) / r;
      u(i) = omega(i) * wx(i) * ratio;
    }
    const Eigen::VectorXd b_new = WeightedLeastSquares(xf, y, u);
    e = y - xf * b_new;
    double sigma_new = sigma;
    if (!options.fixed_sigma) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < e.size(); ++i) {
        const double p = Psi(cfg, e(i) / sigma);
        s += omega(i) * wx(i) * p * p;
      }
      sigma_new = sigma * std::sqrt(s / (kappa * wsum));
      if (!(sigma_new > 0.0) || !std::isfinite(sigma_new)) {
        throw DegenerateScaleError("degenerate scale: scale iterate collapsed");
      }
    }
    const double change = std::max((b_new - b).cwiseAbs().maxCoeff(),
                                   std::abs(sigma_new - sigma));
    const double size = std::max(b_new.cwiseAbs().maxCoeff(), sigma_new);
    b = b_new;
    sigma = sigma_new;
    if (!b.allFinite()) {
      throw ConvergenceError("regression fit produced non-finite values",
                             last_iterate());
    }
    done = change <= tol * (1.0 + size);
  }
  if (!done) {
    throw ConvergenceError("regression fit did not converge in " +
                               std::to_string(options.max_iterations) +
                               " iterations",
                           last_iterate());
  }

  // Newton polish on the joint system, kept only when it lowers the residual.
  const bool joint = !options.fixed_sigma;
  const Eigen::Index dim = nf + (joint ? 1 : 0);
  auto system = [&](const Eigen::VectorXd& bf, double s, Eigen::MatrixXd* jac) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
    if (jac) jac->setZero(dim, dim);
    const Eigen::VectorXd res = y - xf * bf;
    for (Eigen::Index i = 0; i < res.size(); ++i) {
      const double r = res(i) / s;
      const double ps = Psi(cfg, r);
      const double pp = PsiPrime(cfg, r);
      const double a = omega(i) * wx(i);
      const auto xi = xf.row(i).transpose();
      g.head(nf) += a * ps * xi;
      if (joint) g(nf) += a * (ps * ps - kappa);
      if (jac) {
        jac->topLeftCorner(nf, nf) -= (a * pp / s) * xi * xi.transpose();
        if (joint) {
          jac->block(0, nf, nf, 1) -= (a * pp * r / s) * xi;
          jac->block(nf, 0, 1, nf) -= (2.0 * a * ps * pp / s) * xi.transpose();
          (*jac)(nf, nf) -= 2.0 * a * ps * pp * r / s;
        }
      }
    }
    return g;
  };
  for (int polish = 0; polish < 8; ++polish) {
    Eigen::MatrixXd jac;
    const Eigen::VectorXd g = system(b, sigma, &jac);
    if (g.norm() == 0.0) break;
    const Eigen::VectorXd step = jac.fullPivLu().solve(g);
    if (!step.allFinite()) break;
    const Eigen::VectorXd b_try = b - step.head(nf);
    const double s_try = joint ? sigma - step(nf) : sigma;
    if (!(s_try > 0.0)) break;
    if (system(b_try, s_try, nullptr).norm() >= g.norm()) break;
    b = b_try;
    sigma = s_try;
  }
  return {full_beta(b), sigma, it};
}

FitResult MallowsLike(const Dataset& d, EstimatorKind kind,
                      const PsiConfig& cfg,
                      const std::vector<Eigen::Index>& tested,
                      const FitOptions& options) {
  cfg.Validate();
  if (!d.has_response()) throw ValidationError("regression needs a response");
  const Eigen::Index n = d.n();
  const Eigen::Index p = d.m();
  if (n <= p) {
    throw ValidationError("regression needs n > p (n = " + std::to_string(n) +
                          ", p = " + std::to_string(p) + ")");
  }
  const Eigen::VectorXd omega = ObservationWeights(options, n);
  const Eigen::MatrixXd& x = d.x();
  const Eigen::VectorXd& y = *d.y();
  Eigen::VectorXd wx(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    wx(i) = CovariateWeight(cfg, x.row(i).transpose());
  }
  const auto free = Complement(tested, p);
  const ScaleRegression sol =
      SolveScaleRegression(x, y, wx, omega, cfg, free, options);

  FitResult fit;
  fit.kind = kind;
  fit.cfg = cfg;
  fit.theta_hat = sol.beta;
  fit.sigma_hat = sol.sigma;
  fit.iterations = sol.iterations;
  fit.tested_indices = tested;
  fit.intercept_added = d.intercept_added();
  fit.residuals = y - x * sol.beta;
  fit.psi_values.resize(n, p);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = fit.residuals(i) / sol.sigma;
    const auto xi = x.row(i).transpose();
    fit.psi_values.row(i) = (sol.sigma * Psi(cfg, r) * wx(i)) * xi.transpose();
    m += (omega(i) * PsiPrime(cfg, r) * wx(i)) * xi * xi.transpose();
  }
  Finalize(fit, m, omega, options);
  return fit;
}

// ---------------------------------------------------------------------------
// Robust quasilikelihood logistic regression.

struct LogisticTerms {
  double g;        // Psi = g * w * x
  double g_prime;  // d g / d eta
  double p;
};

double Sigmoid(double eta) {
  return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta))
                    : std::exp(eta) / (1.0 + std::exp(eta));
}

// g(eta) = [psi(r_y) - E psi(r)] * sqrt(p (1 - p)) with r_1 = e^{-eta/2} and
// r_0 = -e^{eta/2} the Pearson residuals at y = 1 and y = 0.
LogisticTerms LogisticScore(const PsiConfig& cfg, double eta, double y) {
  const double p = Sigmoid(eta);
  const double s = std::sqrt(p * (1.0 - p));
  const double ds = 0.5 * (1.0 - 2.0 * p) * s;
  const double r1 = std::exp(-0.5 * eta);
  const double r0 = -std::exp(0.5 * eta);
  const double ry = y > 0.5 ? r1 : r0;
  const double dry = y > 0.5 ? -0.5 * r1 : 0.5 * r0;
  const double psi1 = Psi(cfg, r1);
  const double psi0 = Psi(cfg, r0);
  const double h = Psi(cfg, ry) - p * psi1 - (1.0 - p) * psi0;
  const double dh = PsiPrime(cfg, ry) * dry - s * s * psi1 -
                    p * PsiPrime(cfg, r1) * (-0.5 * r1) + s * s * psi0 -
                    (1.0 - p) * PsiPrime(cfg, r0) * (0.5 * r0);
  return {h * s, dh * s + h * ds, p};
}

FitResult LogisticFit(const Dataset& d, const PsiConfig& cfg,
                      const std::vector<Eigen::Index>& tested,
                      const FitOptions& options) {
  cfg.Validate();
  if (!d.has_response()) throw ValidationError("logistic needs a response");
  const Eigen::Index n = d.n();
  const Eigen::Index p = d.m();
  const Eigen::VectorXd& y = *d.y();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y(i) != 0.0 && y(i) != 1.0) {
      throw ValidationError("logistic response must be 0 or 1 (row " +
                            std::to_string(i + 1) + ")");
    }
  }
  if (n <= p) throw ValidationError("logistic needs n > p");
  const Eigen::VectorXd omega = ObservationWeights(options, n);
  const Eigen::MatrixXd& x = d.x();
  const auto free = Complement(tested, p);
  const Eigen::Index nf = static_cast<Eigen::Index>(free.size());
  const Eigen::MatrixXd xf = Columns(x, free);
  RequireFullRank(xf, omega);
  Eigen::VectorXd wx(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    wx(i) = CovariateWeight(cfg, x.row(i).transpose());
  }

  auto evaluate = [&](const Eigen::VectorXd& b, Eigen::MatrixXd* m,
                      Eigen::MatrixXd* fallback, double* max_gap) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(nf);
    if (m) m->setZero(nf, nf);
    if (fallback) fallback->setZero(nf, nf);
    double gap = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto xi = xf.row(i).transpose();
      const LogisticTerms t = LogisticScore(cfg, xi.dot(b), y(i));
      const double a = omega(i) * wx(i);
      g += (a * t.g) * xi;
      if (m) *m -= (a * t.g_prime) * xi * xi.transpose();
      if (fallback) {
        *fallback += (a * t.p * (1.0 - t.p)) * xi * xi.transpose();
      }
      gap = std::max(gap, std::abs(y(i) - t.p));
    }
    if (max_gap) *max_gap = gap;
    return g;
  };

  Eigen::VectorXd b = Eigen::VectorXd::Zero(nf);
  int it = 0;
  bool done = false;
  for (; it < options.max_iterations && !done; ++it) {
    Eigen::MatrixXd m;
    Eigen::MatrixXd fallback;
    double gap = 0.0;
    const Eigen::VectorXd g = evaluate(b, &m, &fallback, &gap);
    if (gap < 1e-8) {
      throw SeparationError(
          "logistic fit diverged: fitted probabilities reproduce the "
          "response exactly (separated data)");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    Eigen::VectorXd step;
    if (llt.info() == Eigen::Success) {
      step = llt.solve(g);
    } else {
      Eigen::LLT<Eigen::MatrixXd> alt(fallback);
      if (alt.info() != Eigen::Success) {
        throw SeparationError("logistic fit diverged: information collapsed");
      }
      step = alt.solve(g);
    }
    const double g_norm = g.norm();
    double scale = 1.0;
    Eigen::VectorXd b_new = b + step;
    for (int half = 0; half < 40; ++half) {
      b_new = b + scale * step;
      if (evaluate(b_new, nullptr, nullptr, nullptr).norm() <= g_norm) break;
      scale *= 0.5;
    }
    const double change = (b_new - b).cwiseAbs().maxCoeff();
    b = b_new;
    if (!b.allFinite() || b.norm() > 1e6) {
      throw SeparationError("logistic fit diverged: ||beta|| exceeds 1e6");
    }
    done = change <= options.tolerance * (1.0 + b.cwiseAbs().maxCoeff()) ||
           g_norm == 0.0;
  }
  if (!done) {
    throw SeparationError("logistic fit did not converge in " +
                          std::to_string(options.max_iterations) +
                          " iterations (possible separation)");
  }

  FitResult fit;
  fit.kind = EstimatorKind::kLogistic;
  fit.cfg = cfg;
  fit.theta_hat = Eigen::VectorXd::Zero(p);
  for (Eigen::Index j = 0; j < nf; ++j) fit.theta_hat(free[j]) = b(j);
  fit.iterations = it;
  fit.tested_indices = tested;
  fit.intercept_added = d.intercept_added();
  fit.residuals.resize(n);
  fit.psi_values.resize(n, p);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto xi = x.row(i).transpose();
    const LogisticTerms t = LogisticScore(cfg, xi.dot(fit.theta_hat), y(i));
    fit.residuals(i) = (y(i) - t.p) / std::sqrt(t.p * (1.0 - t.p));
    fit.psi_values.row(i) = (t.g * wx(i)) * xi.transpose();
    m -= (omega(i) * wx(i) * t.g_prime) * xi * xi.transpose();
  }
  Finalize(fit, m, omega, options);
  return fit;
}

// ---------------------------------------------------------------------------
// Truncated-score maximum likelihood.

FitResult TruncatedMeanFit(const Dataset& d, double c,
                           const FitOptions& options) {
  const Eigen::Index n = d.n();
  const Eigen::VectorXd omega = ObservationWeights(options, n);
  const Eigen::VectorXd x = d.x().col(0);
  auto g = [&](double mu) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += omega(i) * HuberPsi(x(i) - mu, c);
    return s;
  };
  // g is nonincreasing in mu; bisection on the data range, then Newton.
  double lo = x.minCoeff();
  double hi = x.maxCoeff();
  int it = 0;
  for (; it < 2000 && hi - lo > 1e-15 * (1.0 + std::abs(lo) + std::abs(hi));
       ++it) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  double mu = 0.5 * (lo + hi);
  for (int polish = 0; polish < 5; ++polish) {
    double slope = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      slope += omega(i) * HuberPsiPrime(x(i) - mu, c);
    }
    const double r = g(mu);
    if (slope <= 0.0 || r == 0.0) break;
    const double next = mu + r / slope;
    if (std::abs(g(next)) >= std::abs(r)) break;
    mu = next;
  }

  FitResult fit;
  fit.kind = EstimatorKind::kTruncatedGaussianMean;
  fit.cfg = PsiConfig{PsiFamily::kHuber, c, WeightKind::kNone, 2.0};
  fit.theta_hat = Eigen::VectorXd::Constant(1, mu);
  fit.iterations = it;
  fit.residuals = x.array() - mu;
  fit.psi_values.resize(n, 1);
  double m = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    fit.psi_values(i, 0) = HuberPsi(fit.residuals(i), c);
    m += omega(i) * HuberPsiPrime(fit.residuals(i), c);
  }
  Finalize(fit, Eigen::MatrixXd::Constant(1, 1, m), omega, options);
  return fit;
}

FitResult TruncatedRegressionFit(const Dataset& d, double c,
                                 const std::vector<Eigen::Index>& tested,
                                 const FitOptions& options) {
  if (!d.has_response()) throw ValidationError("regression needs a response");
  const Eigen::Index n = d.n();
  const Eigen::Index p = d.m();
  if (n <= p) throw ValidationError("regression needs n > p");
  const Eigen::VectorXd omega = ObservationWeights(options, n);
  const Eigen::MatrixXd& x = d.x();
  const Eigen::VectorXd& y = *d.y();
  const auto free = Complement(tested, p);
  const Eigen::Index nf = static_cast<Eigen::Index>(free.size());
  const Eigen::MatrixXd xf = Columns(x, free);
  RequireFullRank(xf, omega);
  Eigen::VectorXd norms(n);
  for (Eigen::Index i = 0; i < n; ++i) norms(i) = x.row(i).norm();

  // The score e * x truncated at norm c equals psi_{c/||x||}(e) * x, so the
  // fit minimizes a convex Huber loss with a per-row threshold.
  Eigen::VectorXd b = WeightedLeastSquares(xf, y, omega);
  int it = 0;
  bool done = false;
  for (; it < options.max_iterations && !done; ++it) {
    const Eigen::VectorXd e = y - xf * b;
    Eigen::VectorXd u(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = std::abs(e(i)) * norms(i);
      u(i) = omega(i) * (a <= c ? 1.0 : c / a);
    }
    const Eigen::VectorXd b_new = WeightedLeastSquares(xf, y, u);
    const double change = (b_new - b).cwiseAbs().maxCoeff();
    b = b_new;
    done = change <= options.tolerance * (1.0 + b.cwiseAbs().maxCoeff());
  }
  if (!done) {
    throw ConvergenceError("truncated regression did not converge", b);
  }

  FitResult fit;
  fit.kind = EstimatorKind::kTruncatedRegression;
  fit.cfg = PsiConfig{PsiFamily::kHuber, c, WeightKind::kNone, 2.0};
  fit.theta_hat = Eigen::VectorXd::Zero(p);
  for (Eigen::Index j = 0; j < nf; ++j) fit.theta_hat(free[j]) = b(j);
  fit.iterations = it;
  fit.tested_indices = tested;
  fit.intercept_added = d.intercept_added();
  fit.residuals = y - x * fit.theta_hat;
  fit.psi_values.resize(n, p);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto xi = x.row(i).transpose();
    const double a = std::abs(fit.residuals(i)) * norms(i);
    const double weight = a <= c ? 1.0 : c / a;
    fit.psi_values.row(i) = (fit.residuals(i) * weight) * xi.transpose();
    if (a < c) m += omega(i) * xi * xi.transpose();
  }
  Finalize(fit, m, omega, options);
  return fit;
}

}  // namespace

FitResult FitLocationScale(const Dataset& d, const PsiConfig& cfg,
                           const FitOptions& options) {
  cfg.Validate();
  if (d.m() != 1) throw ValidationError("location-scale needs one column");
  const Eigen::Index n = d.n();
  if (n < 3) throw ValidationError("location-scale needs n >= 3");
  if (options.fixed_sigma) {
    throw ValidationError("location-scale estimates its own scale");
  }
  const Eigen::VectorXd omega = ObservationWeights(options, n);
  const Eigen::VectorXd values = d.x().col(0);
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(n, 1);
  const ScaleRegression sol =
      SolveScaleRegression(ones, values, Eigen::VectorXd::Ones(n), omega, cfg,
                           {0}, options);
  const double mu = sol.beta(0);
  const double sigma = sol.sigma;
  const double kappa = Kappa(cfg);

  FitResult fit;
  fit.kind = EstimatorKind::kLocationScale;
  fit.cfg = cfg;
  fit.theta_hat = Eigen::Vector2d(mu, sigma);
  fit.sigma_hat = sigma;
  fit.iterations = sol.iterations;
  fit.residuals = values.array() - mu;
  fit.psi_values.resize(n, 2);
  // Psi = sigma * (psi(r), chi(r) / 2) makes M symmetric:
  // M = mean 1{|r| < c} [[1, r], [r, r^2]].
  Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = fit.residuals(i) / sigma;
    const double ps = Psi(cfg, r);
    fit.psi_values(i, 0) = sigma * ps;
    fit.psi_values(i, 1) = 0.5 * sigma * (ps * ps - kappa);
    const double pp = omega(i) * PsiPrime(cfg, r);
    m(0, 0) += pp;
    m(0, 1) += pp * r;
    m(1, 1) += pp * r * r;
  }
  m(1, 0) = m(0, 1);
  Finalize(fit, m, omega, options);
  return fit;
}

FitResult FitMallows(const Dataset& d, const PsiConfig& cfg,
                     const FitOptions& options) {
  return MallowsLike(d, EstimatorKind::kMallows, cfg, {}, options);
}

FitResult FitRobustLogistic(const Dataset& d, const PsiConfig& cfg,
                            const FitOptions& options) {
  return LogisticFit(d, cfg, {}, options);
}

FitResult FitTruncatedMle(const Dataset& d, EstimatorKind model,
                          const PsiConfig& cfg, const FitOptions& options) {
  cfg.Validate();
  switch (model) {
    case EstimatorKind::kTruncatedGaussianMean:
      if (d.m() != 1) throw ValidationError("gaussian mean needs one column");
      return TruncatedMeanFit(d, cfg.c, options);
    case EstimatorKind::kTruncatedRegression:
      return TruncatedRegressionFit(d, cfg.c, {}, options);
    default:
      throw ValidationError("truncated MLE model must be gaussian-mean or "
                            "regression");
  }
}

FitResult FitRestricted(const Dataset& d, EstimatorKind kind,
                        const PsiConfig& cfg, const RestrictedSpec& r,
                        const FitOptions& options) {
  if (r.tested_indices.empty()) return Fit(d, kind, cfg, options);
  ValidateRestriction(r, d.m(), d.intercept_added());
  switch (kind) {
    case EstimatorKind::kMallows:
      return MallowsLike(d, kind, cfg, r.tested_indices, options);
    case EstimatorKind::kLogistic:
      return LogisticFit(d, cfg, r.tested_indices, options);
    case EstimatorKind::kTruncatedRegression:
      cfg.Validate();
      return TruncatedRegressionFit(d, cfg.c, r.tested_indices, options);
    default:
      throw ValidationError(std::string(EstimatorKindName(kind)) +
                            " has no restrictable coefficients");
  }
}

FitResult Fit(const Dataset& d, EstimatorKind kind, const PsiConfig& cfg,
              const FitOptions& options) {
  switch (kind) {
    case EstimatorKind::kLocationScale:
      return FitLocationScale(d, cfg, options);
    case EstimatorKind::kMallows:
      return FitMallows(d, cfg, options);
    case EstimatorKind::kLogistic:
      return FitRobustLogistic(d, cfg, options);
    case EstimatorKind::kTruncatedGaussianMean:
    case EstimatorKind::kTruncatedRegression:
      return FitTruncatedMle(d, kind, cfg, options);
  }
  throw ValidationError("unknown estimator kind");
}

Eigen::VectorXd EstimatingFunction(const FitResult& fit,
                                   const Eigen::VectorXd& x,
                                   std::optional<double> y) {
  const PsiConfig& cfg = fit.cfg;
  switch (fit.kind) {
    case EstimatorKind::kLocationScale: {
      const double sigma = fit.theta_hat(1);
      const double ps = Psi(cfg, (x(0) - fit.theta_hat(0)) / sigma);
      return Eigen::Vector2d(sigma * ps, 0.5 * sigma * (ps * ps - Kappa(cfg)));
    }
    case EstimatorKind::kTruncatedGaussianMean:
      return Eigen::VectorXd::Constant(1,
                                       HuberPsi(x(0) - fit.theta_hat(0), cfg.c));
    default:
      break;
  }
  if (!y) throw ValidationError("EstimatingFunction: response value required");
  if (x.size() != fit.p()) {
    throw ValidationError("EstimatingFunction: covariate length mismatch");
  }
  const double eta = x.dot(fit.theta_hat);
  switch (fit.kind) {
    case EstimatorKind::kMallows: {
      const double sigma = *fit.sigma_hat;
      return (sigma * Psi(cfg, (*y - eta) / sigma) * CovariateWeight(cfg, x)) *
             x;
    }
    case EstimatorKind::kLogistic:
      return (LogisticScore(cfg, eta, *y).g * CovariateWeight(cfg, x)) * x;
    case EstimatorKind::kTruncatedRegression: {
      const double e = *y - eta;
      const double a = std::abs(e) * x.norm();
      return (e * (a <= cfg.c ? 1.0 : cfg.c / a)) * x;
    }
    default:
      break;
  }
  throw ValidationError("EstimatingFunction: unknown kind");
}

double LossAt(const Dataset& d, const FitResult& fit,
              const Eigen::VectorXd& theta) {
  if (fit.kind != EstimatorKind::kMallows) {
    throw ValidationError("loss is only defined for the regression model");
  }
  const double sigma = *fit.sigma_hat;
  const Eigen::VectorXd e = *d.y() - d.x() * theta;
  double total = 0.0;
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    total += Rho(fit.cfg, e(i) / sigma) *
             CovariateWeight(fit.cfg, d.x().row(i).transpose());
  }
  return total / static_cast<double>(d.n());
}

}  // namespace dprobust
