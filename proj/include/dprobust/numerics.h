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

// Special functions and the seedable Gaussian stream.

#ifndef DPROBUST_NUMERICS_H_
#define DPROBUST_NUMERICS_H_

#include <cstdint>

#include <Eigen/Core>

#include "dprobust/linalg.h"

namespace dprobust {

double NormalCdf(double x);
double NormalPdf(double x);

// Regularized incomplete gamma functions P(a, x) and Q(a, x) = 1 - P(a, x).
// Series for x < a + 1, Lentz continued fraction otherwise.
double RegularizedGammaP(double a, double x);
double RegularizedGammaQ(double a, double x);

// Chi-square distribution with k degrees of freedom.
double ChiSquaredCdf(int k, double x);
// 1 - cdf, evaluated without cancellation.
double ChiSquaredSurvival(int k, double x);
// Density. Returns +infinity at (k = 1, x = 0), where the density diverges.
double ChiSquaredPdf(int k, double x);
// Inverse cdf for u in [0, 1). Throws UnboundedInputError at u = 1.
double ChiSquaredQuantile(int k, double u);
// Inverse survival function: the x with ChiSquaredSurvival(k, x) = p, for p in
// (0, 1]. Throws UnboundedInputError at p = 0.
double ChiSquaredSurvivalQuantile(int k, double p);

// sup_{z > 0} H_k'(n z^2) z, with H_k the chi-square cdf.
double ChiSquaredSupBound(int k, double n);

// Deterministic stream of standard normal draws. Draw i is a pure function of
// (key, i): Box-Muller on a counter-based hash generator, so a stream can be
// reproduced from (seed, stream_id) and a draw index alone. Single owner; use
// Substream() to hand independent streams to concurrent tasks.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  double Next();
  Eigen::VectorXd NextVector(Eigen::Index size);
  // Uniform on the open interval (0, 1), from a lane disjoint from Next().
  double NextUniform();

  GaussianStream Substream(std::uint64_t id) const;

  // Number of normal draws taken so far.
  std::uint64_t counter() const { return counter_; }
  std::uint64_t key() const { return key_; }

  // Draw `index` of the normal lane without advancing the stream.
  double At(std::uint64_t index) const;

 private:
  struct FromKey {};
  GaussianStream(FromKey, std::uint64_t key) : key_(key) {}

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  std::uint64_t uniform_counter_ = 0;
};

}  // namespace dprobust

#endif  // DPROBUST_NUMERICS_H_
