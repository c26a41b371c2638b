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

// Datasets, CSV ingestion and the synthetic regression scenarios.

#ifndef DPROBUST_DATA_H_
#define DPROBUST_DATA_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace dprobust {

inline constexpr std::string_view kInterceptName = "(Intercept)";

// An n x m numeric design with an optional response. Immutable once built;
// the constructor enforces n >= 1, finiteness and matching lengths.
class Dataset {
 public:
  Dataset(Eigen::MatrixXd x, std::optional<Eigen::VectorXd> y,
          std::vector<std::string> column_names, bool intercept_added = false,
          std::string response_name = "y");

  // Single-column data without response, named "x".
  static Dataset Univariate(const Eigen::VectorXd& values);

  Eigen::Index n() const { return x_.rows(); }
  Eigen::Index m() const { return x_.cols(); }
  const Eigen::MatrixXd& x() const { return x_; }
  const std::optional<Eigen::VectorXd>& y() const { return y_; }
  bool has_response() const { return y_.has_value(); }
  const std::vector<std::string>& column_names() const { return column_names_; }
  const std::string& response_name() const { return response_name_; }
  bool intercept_added() const { return intercept_added_; }

  // Column index by name, if present.
  std::optional<Eigen::Index> ColumnIndex(std::string_view name) const;

  Dataset WithInterceptColumn() const;
  Dataset PermuteRows(std::span<const Eigen::Index> order) const;
  // Copy with row i replaced by (x_row, y_value).
  Dataset ReplaceRow(Eigen::Index i, const Eigen::VectorXd& x_row,
                     std::optional<double> y_value = std::nullopt) const;
  Dataset AppendRow(const Eigen::VectorXd& x_row,
                    std::optional<double> y_value = std::nullopt) const;

 private:
  Eigen::MatrixXd x_;
  std::optional<Eigen::VectorXd> y_;
  std::vector<std::string> column_names_;
  std::string response_name_;
  bool intercept_added_;
};

// A response column chosen by header name or by 0-based position.
using ColumnSelector = std::variant<std::string, std::size_t>;

Dataset LoadCsv(const std::filesystem::path& path,
                const std::optional<ColumnSelector>& response = std::nullopt,
                bool add_intercept = false);

// Writes 17 significant digits so values survive a round trip. An added
// intercept column is not written.
void SaveCsv(const Dataset& data, const std::filesystem::path& path);

enum class ScenarioKind {
  kLocationScale,
  kRegressionNormal,
  kRegressionT4Errors,
  kRegressionT4Both,
  kRegressionContaminated,
  kLogistic,
};

std::string_view ScenarioKindName(ScenarioKind kind);
ScenarioKind ParseScenarioKind(std::string_view name);

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::kRegressionNormal;
  Eigen::Index n = 100;
  // Empty selects the kind's default: (1, 1, 0, 0) for regression and
  // logistic kinds, location 0 for location-scale.
  Eigen::VectorXd beta;
  // When set, overrides the third slope (beta_3) for power sweeps.
  std::optional<double> nu;
  double contamination_rate = 0.0;
  std::uint64_t seed = 0;
};

void ValidateScenario(const ScenarioSpec& spec);
Eigen::VectorXd ScenarioBeta(const ScenarioSpec& spec);

// Regression kinds draw x ~ N(0, V) with V_jk = 0.5^|j-k|, y = x^T beta + u,
// and prepend an intercept column. Contamination replaces round(rate * n)
// responses with N(12, 0.1^2) draws and, on an independently drawn row set,
// the same number of second covariates with N(5, 0.1^2) draws.
Dataset GenerateScenario(const ScenarioSpec& spec);

}  // namespace dprobust

#endif  // DPROBUST_DATA_H_
