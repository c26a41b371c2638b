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

#include "dprobust/data.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <utility>

#include <Eigen/Cholesky>

#include "dprobust/errors.h"
#include "dprobust/numerics.h"

namespace dprobust {

Dataset::Dataset(Eigen::MatrixXd x, std::optional<Eigen::VectorXd> y,
                 std::vector<std::string> column_names, bool intercept_added,
                 std::string response_name)
    : x_(std::move(x)),
      y_(std::move(y)),
      column_names_(std::move(column_names)),
      response_name_(std::move(response_name)),
      intercept_added_(intercept_added) {
  if (x_.rows() < 1) throw ValidationError("Dataset: need at least one row");
  if (x_.cols() < 1) throw ValidationError("Dataset: need at least one column");
  if (!x_.allFinite()) throw ValidationError("Dataset: non-finite covariate");
  if (y_) {
    if (y_->size() != x_.rows()) {
      throw ValidationError("Dataset: response length " +
                            std::to_string(y_->size()) + " != rows " +
                            std::to_string(x_.rows()));
    }
    if (!y_->allFinite()) throw ValidationError("Dataset: non-finite response");
  }
  if (column_names_.empty()) {
    for (Eigen::Index j = 0; j < x_.cols(); ++j) {
      column_names_.push_back("x" + std::to_string(j + 1));
    }
  }
  if (static_cast<Eigen::Index>(column_names_.size()) != x_.cols()) {
    throw ValidationError("Dataset: column name count does not match columns");
  }
}

Dataset Dataset::Univariate(const Eigen::VectorXd& values) {
  return Dataset(Eigen::MatrixXd(values), std::nullopt, {"x"});
}

std::optional<Eigen::Index> Dataset::ColumnIndex(std::string_view name) const {
  for (std::size_t j = 0; j < column_names_.size(); ++j) {
    if (column_names_[j] == name) return static_cast<Eigen::Index>(j);
  }
  return std::nullopt;
}

Dataset Dataset::WithInterceptColumn() const {
  if (intercept_added_) return *this;
  Eigen::MatrixXd x(n(), m() + 1);
  x.col(0).setOnes();
  x.rightCols(m()) = x_;
  std::vector<std::string> names;
  names.emplace_back(kInterceptName);
  names.insert(names.end(), column_names_.begin(), column_names_.end());
  return Dataset(std::move(x), y_, std::move(names), true, response_name_);
}

Dataset Dataset::PermuteRows(std::span<const Eigen::Index> order) const {
  if (static_cast<Eigen::Index>(order.size()) != n()) {
    throw ValidationError("PermuteRows: order has wrong length");
  }
  Eigen::MatrixXd x(n(), m());
  std::optional<Eigen::VectorXd> y;
  if (y_) y = Eigen::VectorXd(n());
  for (Eigen::Index i = 0; i < n(); ++i) {
    x.row(i) = x_.row(order[i]);
    if (y) (*y)(i) = (*y_)(order[i]);
  }
  return Dataset(std::move(x), std::move(y), column_names_, intercept_added_,
                 response_name_);
}

Dataset Dataset::ReplaceRow(Eigen::Index i, const Eigen::VectorXd& x_row,
                            std::optional<double> y_value) const {
  if (i < 0 || i >= n()) throw ValidationError("ReplaceRow: index out of range");
  if (x_row.size() != m()) throw ValidationError("ReplaceRow: width mismatch");
  Eigen::MatrixXd x = x_;
  x.row(i) = x_row.transpose();
  std::optional<Eigen::VectorXd> y = y_;
  if (y) {
    if (!y_value) throw ValidationError("ReplaceRow: response value required");
    (*y)(i) = *y_value;
  }
  return Dataset(std::move(x), std::move(y), column_names_, intercept_added_,
                 response_name_);
}

Dataset Dataset::AppendRow(const Eigen::VectorXd& x_row,
                           std::optional<double> y_value) const {
  if (x_row.size() != m()) throw ValidationError("AppendRow: width mismatch");
  Eigen::MatrixXd x(n() + 1, m());
  x.topRows(n()) = x_;
  x.row(n()) = x_row.transpose();
  std::optional<Eigen::VectorXd> y;
  if (y_) {
    if (!y_value) throw ValidationError("AppendRow: response value required");
    y = Eigen::VectorXd(n() + 1);
    y->head(n()) = *y_;
    (*y)(n()) = *y_value;
  }
  return Dataset(std::move(x), std::move(y), column_names_, intercept_added_,
                 response_name_);
}

namespace {

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> SplitCommas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(Trim(line.substr(start)));
      break;
    }
    cells.push_back(Trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return cells;
}

std::string Unquote(std::string_view s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    std::string out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      out.push_back(s[i]);
      if (s[i] == '"' && i + 2 < s.size() && s[i + 1] == '"') ++i;
    }
    return out;
  }
  return std::string(s);
}

double ParseCell(std::string_view cell, std::size_t row, std::size_t col,
                 const std::string& column_name) {
  double value = 0.0;
  std::string_view s = cell;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() ||
      !std::isfinite(value)) {
    throw ParseError("row " + std::to_string(row) + ", column " +
                         std::to_string(col) + " ('" + column_name +
                         "'): cannot parse '" + std::string(cell) +
                         "' as a finite number",
                     row, col);
  }
  return value;
}

}  // namespace

Dataset LoadCsv(const std::filesystem::path& path,
                const std::optional<ColumnSelector>& response,
                bool add_intercept) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (!Trim(line).empty()) {
      for (auto cell : SplitCommas(line)) header.push_back(Unquote(cell));
      break;
    }
  }
  if (header.empty()) throw FormatError(path.string() + ": empty file");

  std::optional<std::size_t> response_col;
  if (response) {
    if (const auto* name = std::get_if<std::string>(&*response)) {
      for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] == *name) response_col = j;
      }
      if (!response_col) {
        throw ValidationError("response column '" + *name + "' not in header");
      }
    } else {
      response_col = std::get<std::size_t>(*response);
      if (*response_col >= header.size()) {
        throw ValidationError("response column index out of range");
      }
    }
  }

  std::vector<std::vector<double>> rows;
  std::size_t row_number = 0;
  while (std::getline(in, line)) {
    if (Trim(line).empty()) continue;
    ++row_number;
    const auto cells = SplitCommas(line);
    if (cells.size() != header.size()) {
      throw ParseError("row " + std::to_string(row_number) + ": expected " +
                           std::to_string(header.size()) + " cells, found " +
                           std::to_string(cells.size()),
                       row_number, std::min(cells.size(), header.size()) + 1);
    }
    std::vector<double> values(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) {
      values[j] = ParseCell(cells[j], row_number, j + 1, header[j]);
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw FormatError(path.string() + ": no data rows");

  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index m =
      static_cast<Eigen::Index>(header.size()) - (response_col ? 1 : 0);
  if (m < 1) throw FormatError(path.string() + ": no covariate columns");
  Eigen::MatrixXd x(n, m);
  std::optional<Eigen::VectorXd> y;
  if (response_col) y = Eigen::VectorXd(n);
  std::vector<std::string> names;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (response_col && j == *response_col) continue;
    names.push_back(header[j]);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index out = 0;
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (response_col && j == *response_col) {
        (*y)(i) = rows[i][j];
      } else {
        x(i, out++) = rows[i][j];
      }
    }
  }
  Dataset data(std::move(x), std::move(y), std::move(names), false,
               response_col ? header[*response_col] : "y");
  return add_intercept ? data.WithInterceptColumn() : data;
}

namespace {

std::string FormatDouble(double v) {
  char buf[64];
  const auto [ptr, ec] =
      std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

}  // namespace

void SaveCsv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  const Eigen::Index first = data.intercept_added() ? 1 : 0;
  bool lead = true;
  for (Eigen::Index j = first; j < data.m(); ++j) {
    out << (lead ? "" : ",") << data.column_names()[j];
    lead = false;
  }
  if (data.has_response()) out << (lead ? "" : ",") << data.response_name();
  out << '\n';
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    lead = true;
    for (Eigen::Index j = first; j < data.m(); ++j) {
      out << (lead ? "" : ",") << FormatDouble(data.x()(i, j));
      lead = false;
    }
    if (data.has_response()) {
      out << (lead ? "" : ",") << FormatDouble((*data.y())(i));
    }
    out << '\n';
  }
}

std::string_view ScenarioKindName(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kLocationScale:
      return "location-scale";
    case ScenarioKind::kRegressionNormal:
      return "regression-normal";
    case ScenarioKind::kRegressionT4Errors:
      return "regression-t4-errors";
    case ScenarioKind::kRegressionT4Both:
      return "regression-t4-both";
    case ScenarioKind::kRegressionContaminated:
      return "regression-contaminated";
    case ScenarioKind::kLogistic:
      return "logistic";
  }
  return "unknown";
}

ScenarioKind ParseScenarioKind(std::string_view name) {
  for (ScenarioKind kind :
       {ScenarioKind::kLocationScale, ScenarioKind::kRegressionNormal,
        ScenarioKind::kRegressionT4Errors, ScenarioKind::kRegressionT4Both,
        ScenarioKind::kRegressionContaminated, ScenarioKind::kLogistic}) {
    if (ScenarioKindName(kind) == name) return kind;
  }
  throw ValidationError("unknown scenario '" + std::string(name) + "'");
}

void ValidateScenario(const ScenarioSpec& spec) {
  if (spec.n < 10) throw ValidationError("scenario: n must be >= 10");
  if (!(spec.contamination_rate >= 0.0 && spec.contamination_rate < 0.5)) {
    throw ValidationError("scenario: contamination rate must lie in [0, 0.5)");
  }
  if (spec.kind == ScenarioKind::kLogistic && spec.contamination_rate > 0.0) {
    throw ValidationError("scenario: logistic scenario has no contamination");
  }
  if (spec.kind != ScenarioKind::kLocationScale) {
    const Eigen::Index p = ScenarioBeta(spec).size();
    if (p < 1) throw ValidationError("scenario: empty coefficient vector");
    if (spec.nu && p < 3) {
      throw ValidationError("scenario: nu needs at least three slopes");
    }
  }
}

Eigen::VectorXd ScenarioBeta(const ScenarioSpec& spec) {
  Eigen::VectorXd beta = spec.beta;
  if (beta.size() == 0) {
    if (spec.kind == ScenarioKind::kLocationScale) {
      beta = Eigen::VectorXd::Zero(1);
    } else {
      beta = Eigen::Vector4d(1.0, 1.0, 0.0, 0.0);
    }
  }
  if (spec.nu && beta.size() >= 3) beta(2) = *spec.nu;
  return beta;
}

namespace {

// Partial Fisher-Yates: `count` distinct indices from [0, n).
std::vector<Eigen::Index> SampleWithoutReplacement(Eigen::Index n,
                                                   Eigen::Index count,
                                                   GaussianStream& stream) {
  std::vector<Eigen::Index> pool(n);
  std::iota(pool.begin(), pool.end(), Eigen::Index{0});
  for (Eigen::Index i = 0; i < count; ++i) {
    const auto j = i + static_cast<Eigen::Index>(stream.NextUniform() * (n - i));
    std::swap(pool[i], pool[std::min(j, n - 1)]);
  }
  pool.resize(count);
  return pool;
}

double StudentT4(GaussianStream& stream) {
  const double z = stream.Next();
  double chi2 = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double g = stream.Next();
    chi2 += g * g;
  }
  return z / std::sqrt(chi2 / 4.0);
}

Eigen::MatrixXd ArOneCorrelation(Eigen::Index p) {
  Eigen::MatrixXd v(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index k = 0; k < p; ++k) {
      v(j, k) = std::pow(0.5, std::abs(static_cast<double>(j - k)));
    }
  }
  return v;
}

}  // namespace

Dataset GenerateScenario(const ScenarioSpec& spec) {
  ValidateScenario(spec);
  const GaussianStream root(spec.seed);
  GaussianStream design_stream = root.Substream(1);
  GaussianStream error_stream = root.Substream(2);
  GaussianStream selection_stream = root.Substream(3);
  GaussianStream outlier_stream = root.Substream(4);
  const Eigen::Index n = spec.n;
  const Eigen::Index contaminated = static_cast<Eigen::Index>(
      std::llround(spec.contamination_rate * static_cast<double>(n)));
  const Eigen::VectorXd beta = ScenarioBeta(spec);

  if (spec.kind == ScenarioKind::kLocationScale) {
    Eigen::VectorXd values(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      values(i) = beta(0) + error_stream.Next();
    }
    for (Eigen::Index i :
         SampleWithoutReplacement(n, contaminated, selection_stream)) {
      values(i) = 12.0 + 0.1 * outlier_stream.Next();
    }
    return Dataset::Univariate(values);
  }

  const Eigen::Index p = beta.size();
  const Eigen::MatrixXd chol = ArOneCorrelation(p).llt().matrixL();
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd z = design_stream.NextVector(p);
    if (spec.kind == ScenarioKind::kRegressionT4Both) {
      double chi2 = 0.0;
      for (int k = 0; k < 4; ++k) {
        const double g = design_stream.Next();
        chi2 += g * g;
      }
      z /= std::sqrt(chi2 / 4.0);
    }
    x.row(i) = (chol * z).transpose();
  }

  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double eta = x.row(i).dot(beta);
    switch (spec.kind) {
      case ScenarioKind::kRegressionT4Errors:
      case ScenarioKind::kRegressionT4Both:
        y(i) = eta + StudentT4(error_stream);
        break;
      case ScenarioKind::kLogistic: {
        const double prob = 1.0 / (1.0 + std::exp(-eta));
        y(i) = error_stream.NextUniform() < prob ? 1.0 : 0.0;
        break;
      }
      default:
        y(i) = eta + error_stream.Next();
        break;
    }
  }

  for (Eigen::Index i :
       SampleWithoutReplacement(n, contaminated, selection_stream)) {
    y(i) = 12.0 + 0.1 * outlier_stream.Next();
  }
  if (p >= 2) {
    for (Eigen::Index i :
         SampleWithoutReplacement(n, contaminated, selection_stream)) {
      x(i, 1) = 5.0 + 0.1 * outlier_stream.Next();
    }
  }

  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
  return Dataset(std::move(x), std::move(y), std::move(names))
      .WithInterceptColumn();
}

}  // namespace dprobust
