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

// Command-line front end, callable in-process so tests can drive it.

#ifndef DPROBUST_TOOLS_CLI_H_
#define DPROBUST_TOOLS_CLI_H_

#include <ostream>
#include <string>
#include <vector>

#include "dprobust/estimators.h"

namespace dprobust::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 2;
inline constexpr int kExitRegularity = 3;
inline constexpr int kExitUnbounded = 4;
inline constexpr int kExitUnsupported = 5;
inline constexpr int kExitOracleBudget = 6;

// Runs one invocation. `args` excludes the program name. Documents go to
// `out` unless --out names a file; diagnostics go to `err`.
int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

// "b3=0,b4=0" or "x3=0": coefficient names b<j> (j = position in theta, b0
// the intercept), "mu" for a location, or a covariate column name. Only
// zero nulls are accepted.
RestrictedSpec ParseNull(const std::string& spec,
                         const std::vector<std::string>& column_names,
                         bool intercept_added);

// JSON keys a run may emit without --release-nonprivate.
const std::vector<std::string>& PrivateKeys(const std::string& command);

}  // namespace dprobust::cli

#endif  // DPROBUST_TOOLS_CLI_H_
