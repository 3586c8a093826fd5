// tools/cli.hpp

// Copyright 2026  The textmdd Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef MDD_TOOLS_CLI_HPP_
#define MDD_TOOLS_CLI_HPP_

#include <ostream>
#include <string>
#include <vector>

namespace mdd::cli {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

/// Runs one subcommand. argv[0] is the program name.
int run(const std::vector<std::string> &argv, std::ostream &out, std::ostream &err);

/// Default phone-set file shipped with the sources.
std::string DefaultPhoneSetPath();

}  // namespace mdd::cli

#endif  // MDD_TOOLS_CLI_HPP_
