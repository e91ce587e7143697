// Copyright 2026 The acomm Authors
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

#ifndef ACOMM_CLI_H_
#define ACOMM_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace acomm {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;  // validation error, nothing written
inline constexpr int kExitPartial = 2;  // some runs failed, partial results written

// Entry point of the `acomm` tool. `args` excludes the program name.
int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

const char* ToolVersion();

}  // namespace acomm

#endif  // ACOMM_CLI_H_
