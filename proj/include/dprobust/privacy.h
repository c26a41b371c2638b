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

// Gaussian mechanism calibrated by gross-error sensitivity, clamped p-value
// releases, and an exact (epsilon, delta) composition ledger.

#ifndef DPROBUST_PRIVACY_H_
#define DPROBUST_PRIVACY_H_

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dprobust/estimators.h"
#include "dprobust/sensitivity.h"

namespace dprobust {

struct PrivacyParams {
  double epsilon = 1.0;
  double delta = 1e-6;

  void Validate() const;
};

// gamma * 5 sqrt(2 ln n ln(2/delta)) / (epsilon n), natural logarithms.
double MechanismScale(double gamma, double n, const PrivacyParams& params);

// Fixed-point decimal with 24 fractional digits. Sums are exact, so the
// ledger totals never drift from the entries they summarize.
class ExactDecimal {
 public:
  ExactDecimal() = default;
  // Rounds the shortest round-trip decimal form of v to 24 places.
  static ExactDecimal FromDouble(double v);

  ExactDecimal& operator+=(const ExactDecimal& other);
  bool operator==(const ExactDecimal& other) const = default;

  std::string ToString() const;
  double ToDouble() const;

 private:
  __int128 units_ = 0;
};

struct LedgerEntry {
  std::string label;
  PrivacyParams params;
};

// Thread-safe append-only ledger under basic composition.
class BudgetLedger {
 public:
  BudgetLedger() = default;
  BudgetLedger(const BudgetLedger& other);
  BudgetLedger& operator=(const BudgetLedger& other);

  void Spend(std::string label, const PrivacyParams& params);
  std::vector<LedgerEntry> entries() const;
  // (sum of epsilon, sum of delta).
  std::pair<double, double> Totals() const;
  std::pair<std::string, std::string> TotalsExact() const;

 private:
  mutable std::mutex mu_;
  std::vector<LedgerEntry> entries_;
  ExactDecimal epsilon_total_;
  ExactDecimal delta_total_;
};

struct DPRelease {
  Eigen::VectorXd value;
  double noise_scale = 0.0;
  double gamma_used = 0.0;
  std::uint64_t seed = 0;
  PrivacyParams params;
  Eigen::Index n = 0;
  bool min_n_satisfied = false;
  // NaN when no minimum-n constants were supplied.
  double min_n_required = 0.0;
  std::optional<Eigen::VectorXd> raw_unclamped;
};

struct ReleaseOptions {
  // Evaluated through MinSampleSize when present.
  std::optional<MinNConstants> min_n_constants;
  MinNKind min_n_kind = MinNKind::kEstimation;
  // Refuse instead of flagging when n is below the requirement.
  bool strict_min_n = false;
  BudgetLedger* ledger = nullptr;
  std::string label;
};

// theta_hat + scale Z with Z from GaussianStream(seed).
DPRelease ReleaseEstimate(const FitResult& fit, const SensitivityReport& report,
                          Eigen::Index n, const PrivacyParams& params,
                          std::uint64_t seed,
                          const ReleaseOptions& options = {});

// alpha_hat + scale Z, clamped to [0, 1]; the raw value is kept.
DPRelease ReleasePValue(double alpha_hat, const SensitivityReport& level_report,
                        Eigen::Index n, const PrivacyParams& params,
                        std::uint64_t seed,
                        const ReleaseOptions& options = {});

// Same as ReleasePValue with the standard normal draw supplied directly.
DPRelease ReleasePValueWithDraw(double alpha_hat,
                                const SensitivityReport& level_report,
                                Eigen::Index n, const PrivacyParams& params,
                                double z, const ReleaseOptions& options = {});

}  // namespace dprobust

#endif  // DPROBUST_PRIVACY_H_
