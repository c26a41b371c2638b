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

// Test-only reference computations. Nothing here calls into the library's
// numerical paths, so they can serve as independent ground truth.

#ifndef DPROBUST_TESTS_ORACLES_H_
#define DPROBUST_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace dprobust::testing {

inline double SimpsonStep(const std::function<double(double)>& f, double a,
                          double b, double fa, double fm, double fb,
                          double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return SimpsonStep(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         SimpsonStep(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

// Adaptive Simpson quadrature.
inline double Integrate(const std::function<double(double)>& f, double a,
                        double b, double tol = 1e-13) {
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return SimpsonStep(f, a, b, fa, fm, fb, whole, tol, 50);
}

inline double StdNormalDensity(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

// Chi-square cdf by quadrature after the substitution x = t^2, which removes
// the k = 1 singularity at the origin.
inline double ChiSquaredCdfByQuadrature(int k, double x) {
  const double half_k = 0.5 * k;
  const double norm = std::pow(2.0, half_k) * std::tgamma(half_k);
  auto integrand = [&](double t) {
    if (t == 0.0) return k == 1 ? 2.0 / norm : 0.0;
    return 2.0 * std::pow(t, k - 1.0) * std::exp(-0.5 * t * t) / norm;
  };
  return Integrate(integrand, 0.0, std::sqrt(x));
}

inline double ChiSquaredDensity(int k, double x) {
  const double half_k = 0.5 * k;
  return std::pow(x, half_k - 1.0) * std::exp(-0.5 * x) /
         (std::pow(2.0, half_k) * std::tgamma(half_k));
}

// Maximum of a unimodal-ish function on [lo, hi]: dense grid, then golden
// section on the best bracket.
inline double GridMaximum(const std::function<double(double)>& f, double lo,
                          double hi, int points = 200000) {
  double best_x = lo;
  double best = -INFINITY;
  const double h = (hi - lo) / points;
  for (int i = 1; i <= points; ++i) {
    const double x = lo + i * h;
    const double v = f(x);
    if (v > best) {
      best = v;
      best_x = x;
    }
  }
  double a = std::max(lo, best_x - h);
  double b = std::min(hi, best_x + h);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int i = 0; i < 200; ++i) {
    const double c = b - g * (b - a);
    const double d = a + g * (b - a);
    if (f(c) > f(d)) {
      b = d;
    } else {
      a = c;
    }
  }
  return std::max(best, f(0.5 * (a + b)));
}

// Extreme eigenvalues as the outermost roots of det(A - lambda I), located
// on a grid and refined by bisection. Uses LU determinants only.
inline std::pair<double, double> ExtremeEigenvaluesByCharPoly(
    const Eigen::MatrixXd& a) {
  const Eigen::Index n = a.rows();
  auto charpoly = [&](double lambda) {
    return (a - lambda * Eigen::MatrixXd::Identity(n, n)).determinant();
  };
  const double bound = a.norm() + 1.0;
  const int points = 20000;
  std::vector<double> roots;
  double prev_x = -bound;
  double prev = charpoly(prev_x);
  for (int i = 1; i <= points; ++i) {
    const double x = -bound + 2.0 * bound * i / points;
    const double v = charpoly(x);
    if ((prev < 0.0) != (v < 0.0)) {
      double lo = prev_x;
      double hi = x;
      const bool lo_neg = prev < 0.0;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if ((charpoly(mid) < 0.0) == lo_neg) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      roots.push_back(0.5 * (lo + hi));
    }
    prev = v;
    prev_x = x;
  }
  return {roots.front(), roots.back()};
}

// E[min(c^2, X^2)] by quadrature over [-12, 12].
inline double KappaByQuadrature(double c) {
  auto f = [c](double x) { return std::min(c * c, x * x) * StdNormalDensity(x); };
  // Split at the kinks so Simpson sees smooth pieces.
  const double lim = 12.0;
  if (c >= lim) return Integrate(f, -lim, lim);
  return Integrate(f, -lim, -c) + Integrate(f, -c, c) + Integrate(f, c, lim);
}

inline double ClampPsi(double r, double c) { return std::max(-c, std::min(c, r)); }

// Root of a nonincreasing function on [lo, hi] by plain bisection.
inline double BisectDecreasing(const std::function<double(double)>& g,
                               double lo, double hi) {
  for (int i = 0; i < 300; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Proposal-2 location and scale by nested one-dimensional searches: mu(sigma)
// solves the psi equation, then sigma is bracketed on a log grid and bisected
// on the chi equation. Returns (mu, sigma).
inline std::pair<double, double> GridFitLocationScale(
    const std::vector<double>& x, double c) {
  const double kappa = KappaByQuadrature(c);
  const double lo_x = *std::min_element(x.begin(), x.end());
  const double hi_x = *std::max_element(x.begin(), x.end());
  auto mu_of = [&](double sigma) {
    return BisectDecreasing(
        [&](double mu) {
          double s = 0.0;
          for (double v : x) s += ClampPsi((v - mu) / sigma, c);
          return s;
        },
        lo_x, hi_x);
  };
  // Sum of chi is decreasing in sigma.
  auto chi_sum = [&](double sigma) {
    const double mu = mu_of(sigma);
    double s = 0.0;
    for (double v : x) {
      const double p = ClampPsi((v - mu) / sigma, c);
      s += p * p - kappa;
    }
    return s;
  };
  const double range = hi_x - lo_x;
  double prev = range * 1e-6;
  double hi = prev;
  for (int i = 0; i < 200; ++i) {
    hi = prev * 1.2;
    if (chi_sum(hi) <= 0.0) break;
    prev = hi;
  }
  const double sigma = BisectDecreasing(chi_sum, prev, hi);
  return {mu_of(sigma), sigma};
}

// Least squares through a Householder QR, independent of the normal equations.
inline Eigen::VectorXd OlsByQr(const Eigen::MatrixXd& x,
                               const Eigen::VectorXd& y) {
  return x.householderQr().solve(y);
}

// Textbook logistic maximum likelihood by Newton-Raphson on the log-likelihood.
inline Eigen::VectorXd LogisticMleByNewton(const Eigen::MatrixXd& x,
                                           const Eigen::VectorXd& y) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(x.cols());
  for (int it = 0; it < 100; ++it) {
    Eigen::VectorXd p(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      p(i) = 1.0 / (1.0 + std::exp(-x.row(i).dot(b)));
    }
    const Eigen::VectorXd grad = x.transpose() * (y - p);
    const Eigen::MatrixXd info =
        x.transpose() * (p.array() * (1.0 - p.array())).matrix().asDiagonal() * x;
    const Eigen::VectorXd step = info.colPivHouseholderQr().solve(grad);
    b += step;
    if (step.norm() < 1e-14) break;
  }
  return b;
}

}  // namespace dprobust::testing

#endif  // DPROBUST_TESTS_ORACLES_H_
