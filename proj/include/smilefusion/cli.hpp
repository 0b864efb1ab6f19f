// Copyright 2026 The SmileFusion Authors.
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

#ifndef SMILEFUSION_CLI_HPP_
#define SMILEFUSION_CLI_HPP_

#include <exception>
#include <ostream>

namespace smilefusion::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

// Entry point of the `smilefusion` tool. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// 1 for configuration/input validation errors, 2 otherwise.
int exit_code_for(const std::exception& e);

}  // namespace smilefusion::cli

#endif  // SMILEFUSION_CLI_HPP_
