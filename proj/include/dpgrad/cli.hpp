// Copyright 2026 The dpgrad-lab Authors
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

#ifndef DPGRAD_CLI_HPP_
#define DPGRAD_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace dpgrad::cli {

/// Routes argv (without the program name) to one of the subcommands
/// {run, sweep-clipping, error-breakdown, denoise-run, account, oracle}.
/// Returns 0 on success, 1 on usage errors (help text lands on `err`),
/// 2 on runtime failures.
int dispatch(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err);

}  // namespace dpgrad::cli

#endif  // DPGRAD_CLI_HPP_
