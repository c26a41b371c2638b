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

#include "dprobust/privacy.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <iterator>
#include <limits>
#include <sstream>

#include "dprobust/errors.h"
#include "dprobust/numerics.h"

namespace dprobust {
namespace {

constexpr int kFractionDigits = 24;

__int128 Pow10(int e) {
  __int128 out = 1;
  for (int i = 0; i < e; ++i) out *= 10;
  return out;
}

// Largest magnitude representable at 24 fractional digits, with headroom
// for sums.
constexpr double kMaxDecimal = 1e13;

}  // namespace

void PrivacyParams::Validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw ValidationError("epsilon must be positive and finite");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw ValidationError("delta must lie in (0, 1)");
  }
}

double MechanismScale(double gamma, double n, const PrivacyParams& params) {
  params.Validate();
  if (!(n >= 2.0)) throw ValidationError("mechanism scale needs n >= 2");
  if (!(gamma >= 0.0) || std::isnan(gamma)) {
    throw ValidationError("sensitivity must be non-negative");
  }
  if (gamma == 0.0) return 0.0;
  return gamma * 5.0 * std::sqrt(2.0 * std::log(n) *
                                 std::log(2.0 / params.delta)) /
         (params.epsilon * n);
}

ExactDecimal ExactDecimal::FromDouble(double v) {
  if (!std::isfinite(v) || std::abs(v) > kMaxDecimal) {
    throw ValidationError("ledger amount out of range");
  }
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string_view text(buf, res.ptr - buf);
  bool negative = false;
  if (!text.empty() && text.front() == '-') {
    negative = true;
    text.remove_prefix(1);
  }
  int exponent = 0;
  if (const auto e = text.find_first_of("eE"); e != std::string_view::npos) {
    std::from_chars(text.data() + e + 1 + (text[e + 1] == '+' ? 1 : 0),
                    text.data() + text.size(), exponent);
    text = text.substr(0, e);
  }
  std::string digits;
  std::copy_if(text.begin(), text.end(), std::back_inserter(digits),
               [](char ch) { return ch != '.'; });
  const auto dot = text.find('.');
  const int int_digits =
      static_cast<int>(dot == std::string_view::npos ? text.size() : dot);
  // value = 0.digits * 10^(int_digits + exponent); shift to units of 1e-24.
  const int shift = int_digits + exponent + kFractionDigits -
                    static_cast<int>(digits.size());
  __int128 mantissa = 0;
  for (char ch : digits) mantissa = mantissa * 10 + (ch - '0');
  __int128 units = 0;
  if (shift >= 0) {
    units = mantissa * Pow10(shift);
  } else if (-shift <= static_cast<int>(digits.size())) {
    const __int128 div = Pow10(-shift);
    units = mantissa / div;
    if (mantissa % div * 2 >= div) ++units;
  }
  ExactDecimal out;
  out.units_ = negative ? -units : units;
  return out;
}

ExactDecimal& ExactDecimal::operator+=(const ExactDecimal& other) {
  units_ += other.units_;
  return *this;
}

std::string ExactDecimal::ToString() const {
  __int128 u = units_ < 0 ? -units_ : units_;
  const __int128 scale = Pow10(kFractionDigits);
  __int128 whole = u / scale;
  __int128 frac = u % scale;
  std::string int_part;
  do {
    int_part.insert(int_part.begin(), static_cast<char>('0' + whole % 10));
    whole /= 10;
  } while (whole > 0);
  std::string frac_part(kFractionDigits, '0');
  for (int i = kFractionDigits - 1; i >= 0; --i) {
    frac_part[i] = static_cast<char>('0' + frac % 10);
    frac /= 10;
  }
  while (!frac_part.empty() && frac_part.back() == '0') frac_part.pop_back();
  std::string out = (units_ < 0 ? "-" : "") + int_part;
  if (!frac_part.empty()) out += "." + frac_part;
  return out;
}

double ExactDecimal::ToDouble() const {
  return std::strtod(ToString().c_str(), nullptr);
}

BudgetLedger::BudgetLedger(const BudgetLedger& other) {
  std::lock_guard<std::mutex> lock(other.mu_);
  entries_ = other.entries_;
  epsilon_total_ = other.epsilon_total_;
  delta_total_ = other.delta_total_;
}

BudgetLedger& BudgetLedger::operator=(const BudgetLedger& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  entries_ = other.entries_;
  epsilon_total_ = other.epsilon_total_;
  delta_total_ = other.delta_total_;
  return *this;
}

void BudgetLedger::Spend(std::string label, const PrivacyParams& params) {
  params.Validate();
  const ExactDecimal eps = ExactDecimal::FromDouble(params.epsilon);
  const ExactDecimal del = ExactDecimal::FromDouble(params.delta);
  std::lock_guard<std::mutex> lock(mu_);
  entries_.push_back({std::move(label), params});
  epsilon_total_ += eps;
  delta_total_ += del;
}

std::vector<LedgerEntry> BudgetLedger::entries() const {
  std::lock_guard<std::mutex> lock(mu_);
  return entries_;
}

std::pair<double, double> BudgetLedger::Totals() const {
  std::lock_guard<std::mutex> lock(mu_);
  return {epsilon_total_.ToDouble(), delta_total_.ToDouble()};
}

std::pair<std::string, std::string> BudgetLedger::TotalsExact() const {
  std::lock_guard<std::mutex> lock(mu_);
  return {epsilon_total_.ToString(), delta_total_.ToString()};
}

namespace {

// Checks shared by both release kinds; fills everything but the value.
DPRelease PrepareRelease(double gamma, Eigen::Index n,
                         const PrivacyParams& params,
                         const ReleaseOptions& options) {
  params.Validate();
  if (std::isinf(gamma)) {
    throw UnboundedSensitivityError(
        "release refused: sensitivity is unbounded");
  }
  if (!(gamma >= 0.0)) {
    throw ValidationError("release: sensitivity must be non-negative");
  }
  DPRelease out;
  out.params = params;
  out.n = n;
  out.gamma_used = gamma;
  out.noise_scale = MechanismScale(gamma, static_cast<double>(n), params);
  if (options.min_n_constants) {
    const MinNResult r = MinSampleSize(options.min_n_kind,
                                     *options.min_n_constants,
                                     static_cast<double>(n));
    out.min_n_satisfied = r.satisfied;
    out.min_n_required = r.n_required;
  } else {
    out.min_n_satisfied = false;
    out.min_n_required = std::numeric_limits<double>::quiet_NaN();
  }
  if (options.strict_min_n && !out.min_n_satisfied) {
    std::ostringstream msg;
    msg << "release refused: n = " << n << " is below the minimum sample size "
        << out.min_n_required;
    throw InsufficientSampleError(msg.str());
  }
  return out;
}

void Record(const ReleaseOptions& options, const PrivacyParams& params,
            const char* fallback) {
  if (options.ledger != nullptr) {
    options.ledger->Spend(options.label.empty() ? fallback : options.label,
                          params);
  }
}

}  // namespace

DPRelease ReleaseEstimate(const FitResult& fit, const SensitivityReport& report,
                          Eigen::Index n, const PrivacyParams& params,
                          std::uint64_t seed, const ReleaseOptions& options) {
  if (!fit.converged) throw ValidationError("release: fit did not converge");
  DPRelease out = PrepareRelease(report.gamma, n, params, options);
  out.seed = seed;
  GaussianStream stream(seed);
  out.value = fit.theta_hat + out.noise_scale * stream.NextVector(fit.p());
  Record(options, params, "estimate");
  return out;
}

DPRelease ReleasePValueWithDraw(double alpha_hat,
                                const SensitivityReport& level_report,
                                Eigen::Index n, const PrivacyParams& params,
                                double z, const ReleaseOptions& options) {
  if (!(alpha_hat >= 0.0 && alpha_hat <= 1.0)) {
    throw ValidationError("release: alpha_hat must lie in [0, 1]");
  }
  DPRelease out = PrepareRelease(level_report.gamma, n, params, options);
  const double raw = alpha_hat + out.noise_scale * z;
  out.raw_unclamped = Eigen::VectorXd::Constant(1, raw);
  out.value = Eigen::VectorXd::Constant(1, std::clamp(raw, 0.0, 1.0));
  Record(options, params, "p-value");
  return out;
}

DPRelease ReleasePValue(double alpha_hat, const SensitivityReport& level_report,
                        Eigen::Index n, const PrivacyParams& params,
                        std::uint64_t seed, const ReleaseOptions& options) {
  GaussianStream stream(seed);
  DPRelease out = ReleasePValueWithDraw(alpha_hat, level_report, n, params,
                                        stream.Next(), options);
  out.seed = seed;
  return out;
}

}  // namespace dprobust
