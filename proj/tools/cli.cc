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

#include "cli.h"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

#include "dprobust/data.h"
#include "dprobust/errors.h"
#include "dprobust/inference.h"
#include "dprobust/numerics.h"
#include "dprobust/oracle.h"
#include "dprobust/privacy.h"
#include "dprobust/sensitivity.h"
#include "dprobust/simulation.h"

namespace dprobust::cli {
namespace {

using nlohmann::json;

struct Args {
  std::string command;
  std::string data;
  std::string scenario;
  std::string response = "y";
  std::string n = "200";
  std::string nu;
  double contamination = 0.0;
  std::uint64_t data_seed = 1;
  std::string model = "regression";
  double c = 1.345;
  double weight_cap = 2.0;
  bool unweighted = false;
  std::optional<double> domain_radius;
  std::string epsilon = "1";
  std::string delta = "n^-2";
  std::uint64_t seed = 0;
  int reps = 100;
  int threads = 1;
  std::string null_spec;
  std::string kind = "wald";
  std::string mode = "corrected";
  double level = 0.05;
  bool strict_min_n = false;
  bool release_nonprivate = false;
  std::optional<double> gamma_override;
  std::string out;
  std::string oracle = "influence";
  std::string functional = "mean";
  std::string grid = "0,1";
  double xi = 0.5;
  std::optional<int> max_hamming;
  std::optional<int> configs;
};

std::vector<std::string> SplitList(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double ParseDouble(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ValidationError("cannot parse " + what + " value '" + s + "'");
}

std::vector<double> ParseDoubles(const std::string& s,
                                 const std::string& what) {
  std::vector<double> out;
  for (const auto& item : SplitList(s)) out.push_back(ParseDouble(item, what));
  if (out.empty()) throw ValidationError("empty " + what + " list");
  return out;
}

// Comma list; an item lo:hi:step expands to an inclusive grid.
std::vector<double> ParseSweep(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& item : SplitList(s)) {
    if (item.find(':') == std::string::npos) {
      out.push_back(ParseDouble(item, what));
      continue;
    }
    std::vector<std::string> parts;
    std::stringstream in(item);
    std::string part;
    while (std::getline(in, part, ':')) parts.push_back(part);
    if (parts.size() != 3) {
      throw ValidationError(what + " range must be lo:hi:step");
    }
    const double lo = ParseDouble(parts[0], what);
    const double hi = ParseDouble(parts[1], what);
    const double step = ParseDouble(parts[2], what);
    if (!(step > 0.0) || hi < lo) {
      throw ValidationError(what + " range needs lo <= hi and step > 0");
    }
    const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    for (long i = 0; i <= count; ++i) out.push_back(lo + step * i);
  }
  if (out.empty()) throw ValidationError("empty " + what + " list");
  return out;
}

std::vector<Eigen::Index> ParseSizes(const std::string& s) {
  std::vector<Eigen::Index> out;
  for (double v : ParseSweep(s, "n")) {
    if (v < 1 || v != std::floor(v)) {
      throw ValidationError("sample sizes must be positive integers");
    }
    out.push_back(static_cast<Eigen::Index>(v));
  }
  return out;
}

double ResolveDelta(const std::string& rule, Eigen::Index n) {
  if (rule == "n^-2") {
    return 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  }
  return ParseDouble(rule, "delta");
}

double SingleEpsilon(const Args& a) {
  const std::vector<double> e = ParseDoubles(a.epsilon, "epsilon");
  if (e.size() != 1) {
    throw ValidationError("an epsilon list is only accepted by simulate");
  }
  return e.front();
}

PsiConfig MakePsi(const Args& a) {
  PsiConfig cfg;
  cfg.c = a.c;
  if (!a.unweighted) {
    cfg.weight = WeightKind::kInverseNorm;
    cfg.weight_cap = a.weight_cap;
  }
  cfg.Validate();
  return cfg;
}

bool IsRegressionModel(const std::string& model) {
  return model == "regression" || model == "logistic";
}

void CheckModelName(const std::string& model) {
  if (model != "location-scale" && model != "regression" &&
      model != "logistic" && model != "truncated-mle") {
    throw ValidationError("unknown model '" + model + "'");
  }
}

Dataset LoadInput(const Args& a) {
  CheckModelName(a.model);
  if (a.data.empty() == a.scenario.empty()) {
    throw ValidationError("give exactly one of --data or --scenario");
  }
  if (!a.scenario.empty()) {
    ScenarioSpec spec;
    spec.kind = ParseScenarioKind(a.scenario);
    const std::vector<Eigen::Index> ns = ParseSizes(a.n);
    if (ns.size() != 1) throw ValidationError("a list of n needs simulate");
    spec.n = ns.front();
    if (!a.nu.empty()) spec.nu = ParseDouble(a.nu, "nu");
    spec.contamination_rate = a.contamination;
    spec.seed = a.data_seed;
    return GenerateScenario(spec);
  }
  const bool response = IsRegressionModel(a.model) ||
                        (a.model == "truncated-mle" && !a.response.empty() &&
                         LoadCsv(a.data).m() > 1);
  if (response) return LoadCsv(a.data, ColumnSelector(a.response), true);
  return LoadCsv(a.data);
}

EstimatorKind ModelKind(const Args& a, const Dataset& d) {
  if (a.model == "location-scale") return EstimatorKind::kLocationScale;
  if (a.model == "regression") return EstimatorKind::kMallows;
  if (a.model == "logistic") return EstimatorKind::kLogistic;
  return d.has_response() ? EstimatorKind::kTruncatedRegression
                          : EstimatorKind::kTruncatedGaussianMean;
}

PrivacyParams Params(const Args& a, Eigen::Index n) {
  PrivacyParams p;
  p.epsilon = SingleEpsilon(a);
  p.delta = ResolveDelta(a.delta, n);
  p.Validate();
  return p;
}

json Vector(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json Finite(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json LedgerJson(const BudgetLedger& ledger) {
  json entries = json::array();
  for (const LedgerEntry& e : ledger.entries()) {
    entries.push_back({{"label", e.label},
                       {"epsilon", e.params.epsilon},
                       {"delta", e.params.delta}});
  }
  const auto [eps, delta] = ledger.TotalsExact();
  return {{"entries", entries}, {"total_epsilon", eps}, {"total_delta", delta}};
}

json CmdFit(const Args& a) {
  const Dataset d = LoadInput(a);
  const EstimatorKind kind = ModelKind(a, d);
  const PsiConfig cfg = MakePsi(a);
  const FitResult fit = Fit(d, kind, cfg);
  if (!fit.converged) {
    throw ConvergenceError("estimator did not converge", fit.theta_hat);
  }
  SensitivityReport report;
  if (kind == EstimatorKind::kLocationScale) {
    // One release of (mu, sigma); the joint sup is at most the hypotenuse.
    const auto [loc, scale] = GesLocationScale(fit);
    report = loc;
    report.gamma = std::hypot(loc.gamma, scale.gamma);
  } else {
    report = GesBound(fit, a.domain_radius);
  }
  if (a.gamma_override) report.gamma = *a.gamma_override;
  const PrivacyParams params = Params(a, d.n());
  BudgetLedger ledger;
  ReleaseOptions opts;
  opts.min_n_constants = DefaultMinNConstants(d, fit, params.epsilon,
                                              params.delta, a.domain_radius);
  opts.strict_min_n = a.strict_min_n;
  opts.ledger = &ledger;
  opts.label = "estimate";
  const DPRelease r = ReleaseEstimate(fit, report, d.n(), params, a.seed, opts);
  json out = {{"model", a.model},
              {"theta_private", Vector(r.value)},
              {"noise_scale", r.noise_scale},
              {"gamma", r.gamma_used},
              {"min_n",
               {{"required", Finite(r.min_n_required)},
                {"satisfied", r.min_n_satisfied}}},
              {"ledger", LedgerJson(ledger)},
              {"seed", a.seed}};
  if (a.release_nonprivate) out["theta_nonprivate"] = Vector(fit.theta_hat);
  return out;
}

json CmdTest(const Args& a, bool ci_only) {
  if (a.null_spec.empty()) throw ValidationError("--null is required");
  const Dataset d = LoadInput(a);
  const EstimatorKind kind = ModelKind(a, d);
  const RestrictedSpec r =
      ParseNull(a.null_spec, d.column_names(), d.intercept_added());
  if (ci_only && r.k() != 1) {
    throw UnsupportedDimensionError(
        "confidence intervals need a single tested coefficient (k = 1)");
  }
  const TestKind test = ParseTestKind(a.kind);
  const QuantileMode mode = ParseQuantileMode(a.mode);
  const PrivacyParams params = Params(a, d.n());
  BudgetLedger ledger;
  TestOptions opts;
  opts.domain_radius = a.domain_radius;
  opts.level_gamma_override = a.gamma_override;
  opts.strict_min_n = a.strict_min_n;
  opts.ledger = &ledger;
  const TestResult t =
      DpTest(d, kind, MakePsi(a), r, test, params, a.seed, mode, opts);
  json ci = nullptr;
  if (t.ci) ci = json::array({Finite(t.ci->first), Finite(t.ci->second)});
  json out = {{"kind", std::string(TestKindName(t.kind))},
              {"k", t.k},
              {"dp_pvalue", t.dp_pvalue.value(0)},
              {"q_recovered", Finite(t.q_recovered)},
              {"ci", ci},
              {"mode", std::string(QuantileModeName(t.mode))},
              {"ledger", LedgerJson(ledger)},
              {"seed", a.seed}};
  if (a.release_nonprivate) {
    out["statistic"] = t.statistic;
    out["alpha_hat"] = t.alpha_hat;
  }
  return out;
}

std::string CmdSimulate(const Args& a) {
  if (!a.data.empty()) throw ValidationError("simulate needs --scenario");
  SimulationConfig c;
  c.scenario =
      ParseScenarioKind(a.scenario.empty() ? "regression-normal" : a.scenario);
  c.ns = ParseSizes(a.n);
  if (!a.nu.empty()) c.nus = ParseSweep(a.nu, "nu");
  c.epsilons = ParseDoubles(a.epsilon, "epsilon");
  if (a.delta != "n^-2") c.delta = ParseDouble(a.delta, "delta");
  c.contamination_rate = a.contamination;
  c.psi = MakePsi(a);
  c.null = ParseNull(a.null_spec.empty() ? "b3=0,b4=0" : a.null_spec, {}, true);
  c.kind = ParseTestKind(a.kind);
  c.nominal_level = a.level;
  c.replications = a.reps;
  c.seed = a.seed;
  c.threads = a.threads;
  return SimulationCsv(RunSimulation(c));
}

json CmdVerify(const Args& a) {
  const int threads = std::max(1, a.threads);
  if (a.oracle == "influence") {
    const VerificationSummary s =
        VerifyInfluenceFunctions(a.configs.value_or(100), a.seed);
    return {{"oracle", a.oracle},
            {"checks", s.checks},
            {"passed", s.passed},
            {"worst_relative_error", s.worst}};
  }
  if (a.oracle == "dominance") {
    const VerificationSummary s =
        VerifyGesDominance(a.configs.value_or(200), a.seed);
    return {{"oracle", a.oracle},
            {"checks", s.checks},
            {"passed", s.passed},
            {"worst_if_to_gamma_ratio", s.worst}};
  }
  if (a.oracle != "smooth" && a.oracle != "local") {
    throw ValidationError("unknown oracle '" + a.oracle + "'");
  }
  const DomainGrid grid = DomainGrid::Univariate(ParseDoubles(a.grid, "grid"));
  Dataset d = Dataset::Univariate(Eigen::VectorXd::Zero(1));
  if (!a.data.empty()) {
    d = LoadCsv(a.data);
  } else {
    // Rows drawn uniformly from the grid.
    const std::vector<Eigen::Index> ns = ParseSizes(a.n);
    if (ns.size() != 1) throw ValidationError("verify takes a single n");
    GaussianStream pick(a.data_seed);
    Eigen::VectorXd v(ns.front());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const auto j =
          std::min(grid.size() - 1,
                   static_cast<std::size_t>(pick.NextUniform() * grid.size()));
      v(i) = grid.Point(j)(0);
    }
    d = Dataset::Univariate(v);
  }
  Functional f;
  double gamma = 0.0;
  const double lo = grid.axes()[0].front();
  const double hi = grid.axes()[0].back();
  if (a.functional == "mean") {
    f = MeanFunctional();
    const double mean = d.x().col(0).mean();
    gamma = std::max(hi - mean, mean - lo);
  } else if (a.functional == "location") {
    f = EstimatorFunctional(EstimatorKind::kLocationScale, PsiConfig{}, 0);
    gamma =
        GesLocationScale(Fit(d, EstimatorKind::kLocationScale, {})).first.gamma;
  } else {
    throw ValidationError("unknown functional '" + a.functional + "'");
  }
  const double n = static_cast<double>(d.n());
  const BruteResult ls = BruteLocalSensitivity(f, d, grid);
  json out = {{"oracle", a.oracle},
              {"functional", a.functional},
              {"n", d.n()},
              {"local_sensitivity", ls.value},
              {"gamma", gamma}};
  if (a.oracle == "local") {
    out["failures"] = ls.failures;
    out["evaluations"] = ls.evaluations;
    return out;
  }
  const int h = a.max_hamming.value_or(static_cast<int>(d.n()));
  const SmoothResult ss = BruteSmoothSensitivity(
      f, d, a.xi, grid, h, std::nullopt, kDefaultOracleBudget, threads);
  const double mechanism = std::sqrt(std::log(n)) * gamma / n;
  out["xi"] = a.xi;
  out["smooth_sensitivity"] = ss.value;
  out["truncation_bound"] = ss.truncation_bound;
  out["failures"] = ss.failures;
  out["evaluations"] = ss.evaluations;
  out["smooth_dominates_local"] = ss.value >= ls.value;
  out["mechanism_to_smooth_ratio"] =
      ss.value > 0.0 ? Finite(mechanism / ss.value) : json(nullptr);
  return out;
}

int ExitCodeFor(const Error& e) {
  if (dynamic_cast<const OracleBudgetError*>(&e)) return kExitOracleBudget;
  if (dynamic_cast<const UnsupportedDimensionError*>(&e)) {
    return kExitUnsupported;
  }
  if (dynamic_cast<const UnboundedSensitivityError*>(&e) ||
      dynamic_cast<const InsufficientSampleError*>(&e)) {
    return kExitUnbounded;
  }
  if (dynamic_cast<const RegularityError*>(&e) ||
      dynamic_cast<const DegenerateScaleError*>(&e) ||
      dynamic_cast<const ConvergenceError*>(&e) ||
      dynamic_cast<const SeparationError*>(&e) ||
      dynamic_cast<const SensitivityUndefinedError*>(&e)) {
    return kExitRegularity;
  }
  return kExitData;
}

void Emit(const Args& a, const std::string& text, std::ostream& out) {
  if (a.out.empty()) {
    out << text;
    return;
  }
  std::ofstream file(a.out, std::ios::binary);
  if (!file) throw ValidationError("cannot open output file " + a.out);
  file << text;
}

}  // namespace

RestrictedSpec ParseNull(const std::string& spec,
                         const std::vector<std::string>& column_names,
                         bool intercept_added) {
  RestrictedSpec r;
  for (const auto& item : SplitList(spec)) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("null item '" + item + "' must look like name=0");
    }
    const std::string name = item.substr(0, eq);
    if (ParseDouble(item.substr(eq + 1), "null") != 0.0) {
      throw ValidationError("only zero nulls are supported: '" + item + "'");
    }
    std::optional<Eigen::Index> pos;
    if (name == "mu") {
      pos = 0;
    } else if (name.size() > 1 && name[0] == 'b' &&
               std::all_of(name.begin() + 1, name.end(),
                           [](char ch) { return ch >= '0' && ch <= '9'; })) {
      pos = std::stol(name.substr(1));
    } else {
      const auto it = std::find(column_names.begin(), column_names.end(), name);
      if (it == column_names.end()) {
        throw ValidationError("unknown column '" + name + "' in null");
      }
      pos = it - column_names.begin();
    }
    if (!column_names.empty() &&
        *pos >= static_cast<Eigen::Index>(column_names.size()) +
                    (intercept_added ? 0 : 1)) {
      throw ValidationError("coefficient '" + name + "' does not exist");
    }
    if (std::find(r.tested_indices.begin(), r.tested_indices.end(), *pos) !=
        r.tested_indices.end()) {
      throw ValidationError("coefficient '" + name + "' listed twice");
    }
    r.tested_indices.push_back(*pos);
  }
  if (r.tested_indices.empty()) throw ValidationError("empty null");
  return r;
}

const std::vector<std::string>& PrivateKeys(const std::string& command) {
  static const std::vector<std::string> fit = {
      "model", "theta_private", "noise_scale", "gamma",
      "min_n", "ledger",        "seed"};
  static const std::vector<std::string> test = {
      "kind", "k", "dp_pvalue", "q_recovered", "ci", "mode", "ledger", "seed"};
  static const std::vector<std::string> none;
  if (command == "fit") return fit;
  if (command == "test" || command == "ci") return test;
  return none;
}

namespace {

// Comma lists arrive split from config files; join them back.
CLI::Option* List(CLI::Option* opt) {
  return opt->delimiter(',')->multi_option_policy(CLI::MultiOptionPolicy::Join);
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  Args a;
  CLI::App app{"Differentially private robust estimation and testing"};
  app.set_config("--config", "", "key=value configuration file");
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--data", a.data, "CSV input");
  app.add_option("--scenario", a.scenario, "simulated scenario name");
  app.add_option("--response", a.response, "response column");
  List(app.add_option("--n", a.n,
                      "sample size (list or lo:hi:step for simulate)"));
  List(app.add_option("--nu", a.nu,
                      "third slope (list or lo:hi:step for simulate)"));
  app.add_option("--contamination", a.contamination, "contamination rate");
  app.add_option("--data-seed", a.data_seed, "scenario seed");
  app.add_option("--model", a.model,
                 "location-scale | regression | logistic | truncated-mle");
  app.add_option("--c", a.c, "Huber tuning constant");
  app.add_option("--weight-cap", a.weight_cap, "r0 in w(x) = min{1, r0/|x|}");
  app.add_flag("--unweighted", a.unweighted, "no covariate weights");
  app.add_option("--domain-radius", a.domain_radius,
                 "bound on |x| for unweighted sensitivity");
  List(app.add_option("--epsilon", a.epsilon, "epsilon (list for simulate)"));
  app.add_option("--delta", a.delta, "delta or n^-2");
  app.add_option("--seed", a.seed, "noise seed");
  app.add_option("--reps", a.reps, "replications");
  app.add_option("--threads", a.threads, "worker threads");
  List(
      app.add_option("--null", a.null_spec, "null hypothesis, e.g. b3=0,b4=0"));
  app.add_option("--kind", a.kind, "wald | score | lr");
  app.add_option("--mode", a.mode, "corrected | paper-literal");
  app.add_option("--level", a.level, "nominal level for simulate");
  app.add_flag("--strict-min-n", a.strict_min_n,
               "refuse releases below the minimum sample size");
  app.add_flag("--release-nonprivate", a.release_nonprivate,
               "also print non-private values; breaks privacy");
  app.add_option("--gamma-override", a.gamma_override,
                 "testing hook: replace the sensitivity; breaks privacy");
  app.add_option("--out", a.out, "output path");
  app.add_option("--oracle", a.oracle,
                 "verify: influence | dominance | local | smooth");
  app.add_option("--functional", a.functional, "verify: mean | location");
  List(app.add_option("--grid", a.grid, "verify: grid points"));
  app.add_option("--xi", a.xi, "verify: smoothing parameter");
  app.add_option("--max-hamming", a.max_hamming, "verify: search radius");
  app.add_option("--configs", a.configs, "verify: number of configurations");
  for (const char* name : {"fit", "test", "ci", "simulate", "verify"}) {
    app.add_subcommand(name)->callback([&a, name] { a.command = name; });
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitData;
  }

  try {
    if (a.reps < 1) throw ValidationError("--reps must be >= 1");
    std::string text;
    if (a.command == "fit") {
      text = CmdFit(a).dump(2) + "\n";
    } else if (a.command == "test" || a.command == "ci") {
      text = CmdTest(a, a.command == "ci").dump(2) + "\n";
    } else if (a.command == "simulate") {
      text = CmdSimulate(a);
    } else {
      text = CmdVerify(a).dump(2) + "\n";
    }
    Emit(a, text, out);
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return ExitCodeFor(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace dprobust::cli
