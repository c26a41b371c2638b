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

#ifndef DPROBUST_ERRORS_H_
#define DPROBUST_ERRORS_H_

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>

namespace dprobust {

// Root of every error thrown by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments or violated preconditions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A cell in an input file could not be parsed. Rows are 1-based data rows
// (the header is not counted); columns are 1-based.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t column)
      : Error(what), row_(row), column_(column) {}
  std::size_t row() const { return row_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

// Structurally unusable input such as an empty file.
class FormatError : public Error {
 public:
  using Error::Error;
};

// A matrix that must be positive definite is singular or indefinite. This is
// the "No Reply" outcome: nothing is released.
class RegularityError : public Error {
 public:
  using Error::Error;
};

class DegenerateScaleError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, Eigen::VectorXd last_iterate)
      : Error(what), last_iterate_(std::move(last_iterate)) {}
  const Eigen::VectorXd& last_iterate() const { return last_iterate_; }

 private:
  Eigen::VectorXd last_iterate_;
};

// Logistic fit diverged, which for binary data means (quasi-)separation.
class SeparationError : public Error {
 public:
  using Error::Error;
};

// A gross-error-sensitivity formula has a zero denominator.
class SensitivityUndefinedError : public Error {
 public:
  using Error::Error;
};

// No finite sensitivity bound exists, so a release must be refused.
class UnboundedSensitivityError : public Error {
 public:
  using Error::Error;
};

// Request for a quantile at probability one, or similar unbounded results.
class UnboundedInputError : public Error {
 public:
  using Error::Error;
};

// Strict mode: n is below the minimum sample size for the guarantee.
class InsufficientSampleError : public Error {
 public:
  using Error::Error;
};

class UnsupportedDimensionError : public Error {
 public:
  using Error::Error;
};

// Brute-force enumeration would exceed the configured work budget.
class OracleBudgetError : public Error {
 public:
  OracleBudgetError(const std::string& what, double estimated_evaluations)
      : Error(what), estimated_evaluations_(estimated_evaluations) {}
  double estimated_evaluations() const { return estimated_evaluations_; }

 private:
  double estimated_evaluations_;
};

}  // namespace dprobust

#endif  // DPROBUST_ERRORS_H_
