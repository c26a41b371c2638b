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

// Monte Carlo replication harness for private tests and estimates on
// simulated regression data. Replication r draws its data and noise from
// substreams keyed by (seed, r), and results are reduced in replication
// order, so output does not depend on the thread count.

#ifndef DPROBUST_SIMULATION_H_
#define DPROBUST_SIMULATION_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dprobust/data.h"
#include "dprobust/estimators.h"
#include "dprobust/inference.h"

namespace dprobust {

struct SimulationConfig {
  ScenarioKind scenario = ScenarioKind::kRegressionNormal;
  std::vector<Eigen::Index> ns{1000};
  // Empty runs the scenario's default coefficients; otherwise one cell per
  // value of the third slope.
  std::vector<double> nus;
  std::vector<double> epsilons{1.0};
  // Unset applies delta = 1 / n^2 at each n.
  std::optional<double> delta;
  double contamination_rate = 0.0;
  PsiConfig psi = DefaultRegressionPsi();
  RestrictedSpec null{{3, 4}};
  TestKind kind = TestKind::kWald;
  double nominal_level = 0.05;
  int replications = 100;
  std::uint64_t seed = 0;
  int threads = 1;
  // Also release a private estimate per replication and track its error.
  bool estimate = true;

  void Validate() const;
  static PsiConfig DefaultRegressionPsi();
};

struct SimulationCell {
  Eigen::Index n = 0;
  std::optional<double> nu;
  double epsilon = 0.0;
  int replications = 0;
  // Replications whose fit or release failed; excluded from the summaries.
  int failures = 0;
  double rejection_rate = 0.0;
  double mc_stderr = 0.0;
  double mean_abs_est_error = 0.0;
  // Per-replication values in replication order, failures omitted.
  std::vector<double> private_errors;
  std::vector<double> nonprivate_errors;
  std::vector<double> pvalues;
};

std::vector<SimulationCell> RunSimulation(const SimulationConfig& config);

// Header plus one row per cell: n, nu, epsilon, replications,
// empirical_level_or_power, mc_stderr, mean_abs_est_error. Doubles use the
// shortest round-trip form; an unset nu is an empty field.
std::string SimulationCsv(const std::vector<SimulationCell>& cells);

double Median(std::vector<double> values);

}  // namespace dprobust

#endif  // DPROBUST_SIMULATION_H_
