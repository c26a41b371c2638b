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

#include "dprobust/numerics.h"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "dprobust/errors.h"

namespace dprobust {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxGammaIterations = 10000;

double GammaPrefactor(double a, double x) {
  return std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double GammaSeries(double a, double x) {
  double ap = a;
  double del = 1.0 / a;
  double sum = del;
  for (int i = 0; i < kMaxGammaIterations; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * kEps) break;
  }
  return sum * GammaPrefactor(a, x);
}

double GammaContinuedFraction(double a, double x) {
  constexpr double kTiny = std::numeric_limits<double>::min() / kEps;
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxGammaIterations; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return GammaPrefactor(a, x) * h;
}

void CheckDegrees(int k) {
  if (k < 1) {
    throw ValidationError("chi-square degrees of freedom must be >= 1, got " +
                          std::to_string(k));
  }
}

std::uint64_t Mix(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t CounterHash(std::uint64_t key, std::uint64_t counter) {
  return Mix(Mix(key ^ Mix(counter)) + counter);
}

// Maps 53 random bits onto the open unit interval.
double ToUnit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

constexpr std::uint64_t kUniformLane = 0xA5A5A5A55A5A5A5AULL;

}  // namespace

double NormalCdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double NormalPdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double RegularizedGammaP(double a, double x) {
  if (!(a > 0.0)) throw ValidationError("RegularizedGammaP: a must be > 0");
  if (!(x >= 0.0)) throw ValidationError("RegularizedGammaP: x must be >= 0");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return GammaSeries(a, x);
  return 1.0 - GammaContinuedFraction(a, x);
}

double RegularizedGammaQ(double a, double x) {
  if (!(a > 0.0)) throw ValidationError("RegularizedGammaQ: a must be > 0");
  if (!(x >= 0.0)) throw ValidationError("RegularizedGammaQ: x must be >= 0");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - GammaSeries(a, x);
  return GammaContinuedFraction(a, x);
}

double ChiSquaredCdf(int k, double x) {
  CheckDegrees(k);
  if (x <= 0.0) return 0.0;
  return RegularizedGammaP(0.5 * k, 0.5 * x);
}

double ChiSquaredSurvival(int k, double x) {
  CheckDegrees(k);
  if (x <= 0.0) return 1.0;
  return RegularizedGammaQ(0.5 * k, 0.5 * x);
}

double ChiSquaredPdf(int k, double x) {
  CheckDegrees(k);
  if (x < 0.0) return 0.0;
  const double half_k = 0.5 * k;
  if (x == 0.0) {
    if (k == 1) return std::numeric_limits<double>::infinity();
    if (k == 2) return 0.5;
    return 0.0;
  }
  return std::exp((half_k - 1.0) * std::log(x) - 0.5 * x -
                  half_k * std::numbers::ln2 - std::lgamma(half_k));
}

namespace {

// Root of a monotone function on [0, inf) by bracketing, bisection and a
// guarded Newton polish. `increasing` gives the direction of g.
template <typename G>
double MonotoneRoot(G g, int k, bool increasing) {
  double lo = 0.0;
  double hi = std::max(1.0, static_cast<double>(k));
  auto below = [&](double x) { return increasing ? g(x) < 0.0 : g(x) > 0.0; };
  while (below(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) break;
  }
  for (int i = 0; i < 2000 && hi - lo > 4.0 * kEps * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (below(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  double x = 0.5 * (lo + hi);
  // Newton polish, accepted only when the residual shrinks.
  for (int i = 0; i < 3; ++i) {
    const double pdf = ChiSquaredPdf(k, x);
    if (!(pdf > 0.0) || std::isinf(pdf)) break;
    const double r = g(x);
    const double step = increasing ? r / pdf : -r / pdf;
    const double next = x - step;
    if (!(next > 0.0) || std::abs(g(next)) >= std::abs(r)) break;
    x = next;
  }
  return x;
}

}  // namespace

double ChiSquaredQuantile(int k, double u) {
  CheckDegrees(k);
  if (!(u >= 0.0) || u > 1.0) {
    throw ValidationError("ChiSquaredQuantile: u must lie in [0, 1)");
  }
  if (u == 1.0) {
    throw UnboundedInputError("ChiSquaredQuantile: quantile at u = 1 is infinite");
  }
  if (u == 0.0) return 0.0;
  return MonotoneRoot([&](double x) { return ChiSquaredCdf(k, x) - u; }, k,
                      /*increasing=*/true);
}

double ChiSquaredSurvivalQuantile(int k, double p) {
  CheckDegrees(k);
  if (!(p >= 0.0) || p > 1.0) {
    throw ValidationError("ChiSquaredSurvivalQuantile: p must lie in (0, 1]");
  }
  if (p == 0.0) {
    throw UnboundedInputError(
        "ChiSquaredSurvivalQuantile: quantile at survival 0 is infinite");
  }
  if (p == 1.0) return 0.0;
  return MonotoneRoot([&](double x) { return ChiSquaredSurvival(k, x) - p; },
                      k, /*increasing=*/false);
}

double ChiSquaredSupBound(int k, double n) {
  CheckDegrees(k);
  if (!(n >= 1.0)) throw ValidationError("ChiSquaredSupBound: n must be >= 1");
  const double km1 = k - 1.0;
  // 0^0 = 1 for k = 1.
  const double log_power = km1 > 0.0 ? 0.5 * km1 * std::log(km1) : 0.0;
  return std::exp(log_power - 0.5 * km1 - 0.5 * std::log(n) -
                  0.5 * k * std::numbers::ln2 - std::lgamma(0.5 * k));
}

GaussianStream::GaussianStream(std::uint64_t seed, std::uint64_t stream_id)
    : key_(Mix(Mix(seed) ^ Mix(stream_id ^ 0x5851F42D4C957F2DULL))) {}

double GaussianStream::At(std::uint64_t index) const {
  const std::uint64_t pair = index >> 1;
  const double u1 = ToUnit(CounterHash(key_, 2 * pair));
  const double u2 = ToUnit(CounterHash(key_, 2 * pair + 1));
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return (index & 1) ? radius * std::sin(angle) : radius * std::cos(angle);
}

double GaussianStream::Next() { return At(counter_++); }

Eigen::VectorXd GaussianStream::NextVector(Eigen::Index size) {
  Eigen::VectorXd out(size);
  for (Eigen::Index i = 0; i < size; ++i) out(i) = Next();
  return out;
}

double GaussianStream::NextUniform() {
  return ToUnit(CounterHash(key_ ^ kUniformLane, uniform_counter_++));
}

GaussianStream GaussianStream::Substream(std::uint64_t id) const {
  return GaussianStream(FromKey{}, Mix(key_ + Mix(id ^ 0x2545F4914F6CDD1DULL)));
}

}  // namespace dprobust
