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

#include "dprobust/simulation.h"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <limits>
#include <thread>

#include "dprobust/errors.h"
#include "dprobust/numerics.h"
#include "dprobust/privacy.h"
#include "dprobust/sensitivity.h"

namespace dprobust {
namespace {

struct Replication {
  bool ok = false;
  // Indexed by epsilon.
  std::vector<double> pvalues;
  std::vector<double> private_errors;
  double nonprivate_error = 0.0;
};

std::string Shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

EstimatorKind ModelFor(ScenarioKind kind) {
  return kind == ScenarioKind::kLogistic ? EstimatorKind::kLogistic
                                         : EstimatorKind::kMallows;
}

Replication RunOne(const SimulationConfig& config, Eigen::Index n,
                   std::optional<double> nu, std::uint64_t r) {
  Replication out;
  const GaussianStream root(config.seed, r);
  ScenarioSpec spec;
  spec.kind = config.scenario;
  spec.n = n;
  spec.nu = nu;
  spec.contamination_rate = config.contamination_rate;
  spec.seed = root.Substream(0).key();
  const EstimatorKind model = ModelFor(config.scenario);
  try {
    const Dataset d = GenerateScenario(spec);
    Eigen::VectorXd truth(d.m());
    truth(0) = 0.0;
    truth.tail(d.m() - 1) = ScenarioBeta(spec);
    std::optional<FitResult> fit;
    std::optional<SensitivityReport> report;
    if (config.estimate) {
      fit = Fit(d, model, config.psi);
      if (!fit->converged) return out;
      report = GesBound(*fit, std::nullopt);
      out.nonprivate_error = (fit->theta_hat - truth).norm();
    }
    for (std::size_t e = 0; e < config.epsilons.size(); ++e) {
      PrivacyParams params;
      params.epsilon = config.epsilons[e];
      params.delta = config.delta.value_or(
          1.0 / (static_cast<double>(n) * static_cast<double>(n)));
      const TestResult t =
          DpTest(d, model, config.psi, config.null, config.kind, params,
                 root.Substream(1 + 2 * e).key(), QuantileMode::kCorrected);
      out.pvalues.push_back(t.dp_pvalue.value(0));
      if (config.estimate) {
        const DPRelease est = ReleaseEstimate(*fit, *report, n, params,
                                              root.Substream(2 + 2 * e).key());
        out.private_errors.push_back((est.value - truth).norm());
      }
    }
  } catch (const Error&) {
    return out;
  }
  out.ok = true;
  return out;
}

}  // namespace

PsiConfig SimulationConfig::DefaultRegressionPsi() {
  PsiConfig cfg;
  cfg.weight = WeightKind::kInverseNorm;
  cfg.weight_cap = 2.0;
  return cfg;
}

void SimulationConfig::Validate() const {
  if (scenario == ScenarioKind::kLocationScale) {
    throw ValidationError("simulate needs a regression or logistic scenario");
  }
  if (ns.empty() || epsilons.empty()) {
    throw ValidationError("simulate needs at least one n and one epsilon");
  }
  for (Eigen::Index n : ns) {
    if (n < 10) throw ValidationError("simulate needs n >= 10");
  }
  for (double e : epsilons) {
    if (!(e > 0.0) || !std::isfinite(e)) {
      throw ValidationError("epsilon must be positive and finite");
    }
  }
  if (delta && !(*delta > 0.0 && *delta < 1.0)) {
    throw ValidationError("delta must lie in (0, 1)");
  }
  if (replications < 1) throw ValidationError("replications must be >= 1");
  if (!(nominal_level > 0.0 && nominal_level < 1.0)) {
    throw ValidationError("nominal level must lie in (0, 1)");
  }
  if (null.k() == 0) throw ValidationError("simulate needs a null hypothesis");
  psi.Validate();
}

std::vector<SimulationCell> RunSimulation(const SimulationConfig& config) {
  config.Validate();
  std::vector<std::optional<double>> nus;
  for (double v : config.nus) nus.emplace_back(v);
  if (nus.empty()) nus.emplace_back(std::nullopt);

  std::vector<SimulationCell> cells;
  const auto reps = static_cast<std::size_t>(config.replications);
  for (Eigen::Index n : config.ns) {
    for (const auto& nu : nus) {
      std::vector<Replication> results(reps);
      std::atomic<std::size_t> next{0};
      auto worker = [&] {
        for (std::size_t r = next++; r < reps; r = next++) {
          results[r] = RunOne(config, n, nu, r);
        }
      };
      std::vector<std::thread> pool;
      for (int t = 1; t < std::max(1, config.threads); ++t) {
        pool.emplace_back(worker);
      }
      worker();
      for (auto& th : pool) th.join();

      for (std::size_t e = 0; e < config.epsilons.size(); ++e) {
        SimulationCell cell;
        cell.n = n;
        cell.nu = nu;
        cell.epsilon = config.epsilons[e];
        cell.replications = config.replications;
        int rejections = 0;
        double error_sum = 0.0;
        for (const Replication& rep : results) {
          if (!rep.ok) {
            ++cell.failures;
            continue;
          }
          cell.pvalues.push_back(rep.pvalues[e]);
          if (rep.pvalues[e] < config.nominal_level) ++rejections;
          if (config.estimate) {
            cell.private_errors.push_back(rep.private_errors[e]);
            cell.nonprivate_errors.push_back(rep.nonprivate_error);
            error_sum += rep.private_errors[e];
          }
        }
        const auto used = static_cast<double>(cell.pvalues.size());
        if (used > 0) {
          cell.rejection_rate = rejections / used;
          cell.mc_stderr = std::sqrt(cell.rejection_rate *
                                     (1.0 - cell.rejection_rate) / used);
          cell.mean_abs_est_error =
              config.estimate ? error_sum / used
                              : std::numeric_limits<double>::quiet_NaN();
        } else {
          cell.rejection_rate = std::numeric_limits<double>::quiet_NaN();
          cell.mc_stderr = std::numeric_limits<double>::quiet_NaN();
          cell.mean_abs_est_error = std::numeric_limits<double>::quiet_NaN();
        }
        cells.push_back(std::move(cell));
      }
    }
  }
  return cells;
}

std::string SimulationCsv(const std::vector<SimulationCell>& cells) {
  std::string out =
      "n,nu,epsilon,replications,empirical_level_or_power,mc_stderr,"
      "mean_abs_est_error\n";
  for (const SimulationCell& c : cells) {
    out += std::to_string(c.n) + ",";
    if (c.nu) out += Shortest(*c.nu);
    out += "," + Shortest(c.epsilon) + "," + std::to_string(c.replications) +
           "," + Shortest(c.rejection_rate) + "," + Shortest(c.mc_stderr) +
           "," + Shortest(c.mean_abs_est_error) + "\n";
  }
  return out;
}

double Median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of an empty sample");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

}  // namespace dprobust
