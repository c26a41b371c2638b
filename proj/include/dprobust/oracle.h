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

// Brute-force ground truth: local and smooth sensitivities by enumeration on
// small grids, finite-difference influence functions, and an independent
// location-scale solver.

#ifndef DPROBUST_ORACLE_H_
#define DPROBUST_ORACLE_H_

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "dprobust/data.h"
#include "dprobust/estimators.h"

namespace dprobust {

// Product grid over the raw columns of one observation: covariates without
// the intercept, then the response when present.
class DomainGrid {
 public:
  static constexpr std::size_t kMaxPerAxis = 32;

  explicit DomainGrid(std::vector<std::vector<double>> axes);
  static DomainGrid Univariate(std::vector<double> points);

  std::size_t dim() const { return axes_.size(); }
  std::size_t size() const;
  // Point `index` in row-major order over the axes.
  Eigen::VectorXd Point(std::size_t index) const;
  const std::vector<std::vector<double>>& axes() const { return axes_; }

 private:
  std::vector<std::vector<double>> axes_;
};

// Statistical functional evaluated at a weighted empirical distribution;
// empty weights mean uniform. Throws when undefined at the input.
using Functional =
    std::function<Eigen::VectorXd(const Dataset&, const Eigen::VectorXd&)>;

Functional MeanFunctional();
Functional ConstantFunctional(const Eigen::VectorXd& value);
// theta_hat of the given estimator, optionally a single component. `base`
// supplies fit options such as a fixed regression scale; its observation
// weights are replaced by the functional's.
Functional EstimatorFunctional(EstimatorKind kind, const PsiConfig& cfg,
                               std::optional<Eigen::Index> component = {},
                               FitOptions base = {});

struct BruteResult {
  double value = 0.0;
  // Neighbors on which the functional failed; skipped, never read as zero.
  std::int64_t failures = 0;
  std::int64_t evaluations = 0;
};

inline constexpr std::int64_t kDefaultOracleBudget = 20'000'000;

// max_{i, v} ||f(d) - f(d with row i replaced by grid point v)||.
BruteResult BruteLocalSensitivity(const Functional& f, const Dataset& d,
                                  const DomainGrid& g,
                                  std::int64_t budget = kDefaultOracleBudget);

struct SmoothResult {
  double value = 0.0;
  // e^{-xi (max_hamming + 1)} times a global local-sensitivity bound; zero
  // when the search covers every reachable dataset.
  double truncation_bound = 0.0;
  std::int64_t failures = 0;
  std::int64_t evaluations = 0;
};

// sup over D' within max_hamming of e^{-xi d_H(d, D')} LS(D'). n <= 6.
// global_ls_bound certifies the tail when max_hamming < n; without it the
// full grid is enumerated for the bound.
SmoothResult BruteSmoothSensitivity(
    const Functional& f, const Dataset& d, double xi, const DomainGrid& g,
    int max_hamming, std::optional<double> global_ls_bound = std::nullopt,
    std::int64_t budget = kDefaultOracleBudget, int threads = 1);

// Number of functional evaluations the smooth search would need.
std::int64_t SmoothSensitivityCost(std::int64_t n, std::int64_t grid_size,
                                   int max_hamming);

// (f((1 - t) F_n + t Delta_z) - f(F_n)) / t. z_y is the response for
// regression datasets; z_x excludes the intercept.
Eigen::VectorXd FiniteDifferenceIf(const Functional& f, const Dataset& d,
                                   const Eigen::VectorXd& z_x,
                                   std::optional<double> z_y, double t);

// Linear extrapolation of two finite differences to t = 0.
Eigen::VectorXd RichardsonIf(const Functional& f, const Dataset& d,
                             const Eigen::VectorXd& z_x,
                             std::optional<double> z_y, double t1 = 1e-5,
                             double t2 = 1e-6);

struct GridFitResult {
  double mu = 0.0;
  double sigma = 0.0;
  bool degenerate = false;
};

// Proposal-2 location and scale by a coarse log grid in sigma and nested
// bisections; independent of the estimator module's solver.
GridFitResult GridFitOracle(const Dataset& d, double c = 1.345);

struct VerificationSummary {
  int checks = 0;
  int passed = 0;
  // Largest relative error (influence) or largest max_i ||IF_i|| / gamma
  // (dominance) seen.
  double worst = 0.0;
};

// Analytic M^{-1} Psi against FiniteDifferenceIf at step t on `configs`
// seeded configurations cycling through location-scale, Mallows regression
// at fixed scale, robust logistic and the truncated Gaussian mean. A check
// passes when ||FD - IF|| < tolerance * ||IF||.
VerificationSummary VerifyInfluenceFunctions(int configs, std::uint64_t seed,
                                             double t = 1e-6,
                                             double tolerance = 1e-3);

// report.gamma >= max_i ||IF(x_i)|| on `datasets` seeded datasets cycling
// through every estimator family, contaminated and clean.
VerificationSummary VerifyGesDominance(int datasets, std::uint64_t seed);

}  // namespace dprobust

#endif  // DPROBUST_ORACLE_H_
