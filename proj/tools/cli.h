// Copyright 2026 The LoadVeil Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LOADVEIL_TOOLS_CLI_H_
#define LOADVEIL_TOOLS_CLI_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace loadveil::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Runs one subcommand (synth, train, obfuscate, evaluate, epsilon).
// args[0] is the program name. Never throws; failures map to exit codes.
int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace loadveil::cli

#endif  // LOADVEIL_TOOLS_CLI_H_
