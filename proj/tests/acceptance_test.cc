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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <json.hpp>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cli.h"
#include "dprobust/data.h"
#include "dprobust/numerics.h"
#include "dprobust/oracle.h"
#include "dprobust/privacy.h"
#include "dprobust/sensitivity.h"
#include "dprobust/simulation.h"
#include "oracles.h"

namespace dprobust {
namespace {

using nlohmann::json;

int Threads() {
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

struct Criterion {
  int id;
  std::string name;
  bool pass;
  std::string detail;
};

std::string Fmt(const char* format, double a, double b = 0, double c = 0,
                double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, a, b, c, d);
  return buf;
}

SimulationConfig LevelConfig(double epsilon) {
  SimulationConfig c;
  c.ns = {1000};
  c.epsilons = {epsilon};
  c.replications = 2000;
  c.seed = 20260101;
  c.threads = Threads();
  c.estimate = false;
  return c;
}

Criterion LevelCalibration() {
  const SimulationCell cell = RunSimulation(LevelConfig(1.0)).front();
  const double level = cell.rejection_rate;
  return {1, "level calibration, n=1000, eps=1",
          level >= 0.03 && level <= 0.07 && cell.failures == 0,
          Fmt("empirical level %.4f (mc se %.4f, failures %.0f), target "
              "[0.03, 0.07]",
              level, cell.mc_stderr, cell.failures)};
}

Criterion CoinFlip() {
  const SimulationCell cell = RunSimulation(LevelConfig(0.001)).front();
  const double level = cell.rejection_rate;
  return {2, "coin-flip degeneracy, n=1000, eps=0.001",
          level >= 0.40 && level <= 0.60 && cell.failures == 0,
          Fmt("rejection rate %.4f (failures %.0f), target [0.40, 0.60]", level,
              cell.failures)};
}

Criterion Contamination() {
  SimulationConfig robust = LevelConfig(1.0);
  robust.scenario = ScenarioKind::kRegressionContaminated;
  robust.contamination_rate = 0.01;
  SimulationConfig naive = robust;
  naive.psi.c = 1e6;
  const SimulationCell r = RunSimulation(robust).front();
  const SimulationCell v = RunSimulation(naive).front();
  const bool pass = r.rejection_rate >= 0.03 && r.rejection_rate <= 0.09 &&
                    v.rejection_rate - r.rejection_rate >= 0.02 &&
                    r.failures == 0 && v.failures == 0;
  return {3, "contamination stability, 1% outliers, n=1000, eps=1", pass,
          Fmt("robust level %.4f (target [0.03, 0.09]); c=1e6 level %.4f, "
              "difference %.4f (target >= 0.02)",
              r.rejection_rate, v.rejection_rate,
              v.rejection_rate - r.rejection_rate)};
}

Criterion Consistency() {
  SimulationConfig c;
  c.ns = {100, 200, 500, 1000};
  c.epsilons = {0.2};
  c.replications = 500;
  c.seed = 20260202;
  c.threads = Threads();
  const std::vector<SimulationCell> cells = RunSimulation(c);
  std::vector<double> medians;
  bool decreasing = true;
  bool failures = false;
  std::string trace;
  for (const SimulationCell& cell : cells) {
    medians.push_back(Median(cell.private_errors));
    if (medians.size() > 1 && !(medians.back() < medians[medians.size() - 2])) {
      decreasing = false;
    }
    failures = failures || cell.failures > 0;
    trace += Fmt("n=%.0f:%.4g ", static_cast<double>(cell.n), medians.back());
  }
  const double nonprivate = Median(cells.back().nonprivate_errors);
  const double ratio = medians.back() / nonprivate;
  return {4, "estimator consistency, eps=0.2",
          decreasing && ratio <= 2.0 && !failures,
          "median private error " + trace +
              Fmt("; n=1000 non-private median %.4g, ratio %.3g (target <= "
                  "2); strictly decreasing: ",
                  nonprivate, ratio) +
              (decreasing ? "yes" : "no")};
}

Criterion PowerCurve() {
  SimulationConfig c;
  c.ns = {200};
  for (int i = -10; i <= 10; ++i) c.nus.push_back(0.05 * i);
  c.epsilons = {1.0};
  c.replications = 1000;
  c.seed = 20260303;
  c.threads = Threads();
  c.estimate = false;
  const std::vector<SimulationCell> cells = RunSimulation(c);
  const double p0 = cells[10].rejection_rate;
  const double lo = cells.front().rejection_rate;
  const double hi = cells.back().rejection_rate;
  double asym = 0.0;
  for (int i = 0; i < 10; ++i) {
    asym = std::max(
        asym, std::abs(cells[i].rejection_rate - cells[20 - i].rejection_rate));
  }
  const bool pass = lo - p0 >= 0.3 && hi - p0 >= 0.3 && asym <= 0.05;
  return {5, "power curve shape, n=200, eps=1", pass,
          Fmt("power at nu=-0.5 %.4f, nu=0 %.4f, nu=+0.5 %.4f (target gain "
              ">= 0.3); max |power(nu) - power(-nu)| %.4f (target <= 0.05)",
              lo, p0, hi, asym)};
}

Criterion OracleSuite() {
  // (a) influence functions against finite differences.
  const VerificationSummary infl = VerifyInfluenceFunctions(100, 606, 1e-6);
  const bool a = infl.checks == 100 && infl.passed == 100;

  // (b) smooth sensitivity dominates local sensitivity.
  int enumerated = 0;
  int dominated = 0;
  const std::vector<std::vector<double>> grids = {
      {0, 1}, {-1, 0, 1}, {-2, -1, 0, 1, 2}};
  for (const auto& points : grids) {
    const DomainGrid grid = DomainGrid::Univariate(points);
    for (Eigen::Index n : {3, 4, 5}) {
      GaussianStream pick(static_cast<std::uint64_t>(n * 31 + points.size()));
      Eigen::VectorXd v(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        v(i) = points[std::min(
            points.size() - 1,
            static_cast<std::size_t>(pick.NextUniform() * points.size()))];
      }
      const Dataset d = Dataset::Univariate(v);
      for (int which = 0; which < 2; ++which) {
        const Functional f =
            which == 0
                ? MeanFunctional()
                : EstimatorFunctional(EstimatorKind::kLocationScale, {}, 0);
        double ls = 0.0;
        try {
          ls = BruteLocalSensitivity(f, d, grid).value;
        } catch (const Error&) {
          continue;  // Location undefined at d itself (no scale).
        }
        for (double xi : {0.1, 1.0}) {
          const SmoothResult ss = BruteSmoothSensitivity(
              f, d, xi, grid, static_cast<int>(n), std::nullopt,
              kDefaultOracleBudget, Threads());
          ++enumerated;
          if (ss.value >= ls) ++dominated;
        }
      }
    }
  }
  const bool b = enumerated > 0 && dominated == enumerated;

  // (c) sample mean on a grid: LS = SS = range / n.
  bool c = true;
  double worst_c = 0.0;
  for (Eigen::Index n = 2; n <= 6; ++n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = static_cast<double>(i % 2);
    const Dataset d = Dataset::Univariate(v);
    const DomainGrid grid = DomainGrid::Univariate({0.0, 1.0});
    const double want = 1.0 / static_cast<double>(n);
    const double ls = BruteLocalSensitivity(MeanFunctional(), d, grid).value;
    const double ss = BruteSmoothSensitivity(MeanFunctional(), d, 0.5, grid,
                                             static_cast<int>(n))
                          .value;
    // Rounding of the two means is the only source of difference.
    worst_c = std::max({worst_c, std::abs(ls - want), std::abs(ss - want)});
    c = c && std::abs(ls - want) <= 1e-15 && std::abs(ss - want) <= 1e-15;
  }

  // (d) GES dominates the sample influence function.
  const VerificationSummary dom = VerifyGesDominance(200, 707);
  const bool dpass = dom.checks >= 200 && dom.passed == dom.checks;

  return {6, "oracle suite", a && b && c && dpass,
          Fmt("(a) FD-IF %.0f/100 pass, worst rel err %.2e; ", infl.passed,
              infl.worst) +
              Fmt("(b) SS>=LS %.0f/%.0f; ", dominated, enumerated) +
              Fmt("(c) mean closed forms worst dev %.1e; ", worst_c) +
              Fmt("(d) GES dominance %.0f/%.0f, worst ratio %.6f", dom.passed,
                  dom.checks, dom.worst)};
}

Criterion Numerics() {
  double worst_round_trip = 0.0;
  for (int k : {1, 2, 3, 5, 10}) {
    for (int i = 1; i <= 99; ++i) {
      const double u = 0.999 * i / 100.0;
      worst_round_trip =
          std::max(worst_round_trip,
                   std::abs(ChiSquaredCdf(k, ChiSquaredQuantile(k, u)) - u));
    }
  }
  double worst_sup = 0.0;
  for (int k : {1, 2, 3, 5, 10}) {
    for (double n : {1.0, 50.0, 1000.0}) {
      const double grid = testing::GridMaximum(
          [&](double z) {
            return testing::ChiSquaredDensity(k, n * z * z) * z;
          },
          1e-9, 10.0 / std::sqrt(n));
      worst_sup =
          std::max(worst_sup, std::abs(grid - ChiSquaredSupBound(k, n)));
    }
  }
  return {7, "chi-square numerics",
          worst_round_trip < 1e-10 && worst_sup <= 1e-6,
          Fmt("worst cdf(quantile(u)) - u %.2e (target < 1e-10); worst "
              "sup-bound deviation %.2e (target <= 1e-6)",
              worst_round_trip, worst_sup)};
}

json RunCli(const std::vector<std::string>& args, int* code) {
  std::ostringstream out;
  std::ostringstream err;
  *code = cli::Run(args, out, err);
  if (*code != cli::kExitOk) return json();
  return json::parse(out.str());
}

Criterion PrivacyPlumbing() {
  PrivacyParams hand;
  hand.epsilon = 1.0;
  hand.delta = 0.01;
  const double scale = MechanismScale(1.0, 100, hand);
  const bool scale_ok = std::abs(scale - 0.34929) <= 1e-4;

  BudgetLedger ledger;
  PrivacyParams tenth;
  tenth.epsilon = 0.1;
  tenth.delta = 1e-5;
  for (int i = 0; i < 10; ++i) ledger.Spend("q", tenth);
  PrivacyParams third;
  third.epsilon = 0.3;
  third.delta = 2e-6;
  ledger.Spend("r", third);
  const auto [eps, delta] = ledger.TotalsExact();
  const bool ledger_ok = eps == "1.3" && delta == "0.000102";

  ScenarioSpec spec;
  spec.n = 400;
  spec.seed = 5;
  const Dataset d = GenerateScenario(spec);
  PsiConfig cfg;
  cfg.weight = WeightKind::kInverseNorm;
  const FitResult fit = Fit(d, EstimatorKind::kMallows, cfg);
  const SensitivityReport rep = GesBound(fit);
  const DPRelease r1 = ReleaseEstimate(fit, rep, d.n(), hand, 99);
  const DPRelease r2 = ReleaseEstimate(fit, rep, d.n(), hand, 99);
  bool repro = r1.value.size() == r2.value.size() &&
               std::memcmp(r1.value.data(), r2.value.data(),
                           sizeof(double) * r1.value.size()) == 0;

  const std::vector<std::string> base = {
      "--scenario", "regression-normal", "--n", "300", "--seed", "21"};
  bool allow = true;
  std::string leaked;
  for (const std::string command : {"fit", "test", "ci"}) {
    std::vector<std::string> args = {command};
    args.insert(args.end(), base.begin(), base.end());
    if (command != "fit") args.insert(args.end(), {"--null", "b3=0"});
    int code = 0;
    const json first = RunCli(args, &code);
    int code2 = 0;
    const json second = RunCli(args, &code2);
    repro = repro && code == 0 && code2 == 0 && first == second;
    if (code != 0) {
      allow = false;
      continue;
    }
    const auto& keys = cli::PrivateKeys(command);
    for (const auto& [key, value] : first.items()) {
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
        allow = false;
        leaked += command + ":" + key + " ";
      }
    }
    allow = allow && first["ledger"]["entries"].size() == 1;
  }
  return {8, "privacy plumbing", scale_ok && ledger_ok && repro && allow,
          Fmt("mechanism scale %.6f (target 0.34929 +- 1e-4); ", scale) +
              "ledger totals (" + eps + ", " + delta +
              ") expected (1.3, 0.000102); bit-reproducible: " +
              (repro ? "yes" : "no") +
              "; key allowlist: " + (allow ? "pass" : "fail " + leaked)};
}

}  // namespace
}  // namespace dprobust

int main() {
  using dprobust::Criterion;
  std::vector<Criterion (*)()> checks = {
      dprobust::LevelCalibration, dprobust::CoinFlip,
      dprobust::Contamination,    dprobust::Consistency,
      dprobust::PowerCurve,       dprobust::OracleSuite,
      dprobust::Numerics,         dprobust::PrivacyPlumbing};
  int failed = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Criterion c;
    try {
      c = checks[i]();
    } catch (const std::exception& e) {
      c = {static_cast<int>(i) + 1, "raised an exception", false, e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::printf("%s criterion %d: %s | %s [%.1fs]\n", c.pass ? "PASS" : "FAIL",
                c.id, c.name.c_str(), c.detail.c_str(), secs);
    std::fflush(stdout);
    if (!c.pass) ++failed;
  }
  std::printf("%d of %zu criteria passed\n",
              static_cast<int>(checks.size()) - failed, checks.size());
  return failed == 0 ? 0 : 1;
}
