// Copyright (c) 2026 The w4ax Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>

namespace w4ax::cli {

enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kDataError = 2,
  kSchemaMismatch = 3,
  kUsage = 64,
};

/// Entry point of the w4ax tool; writes normal output to `out` and
/// diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// FNV-1a over the little-endian bit patterns of `values`.
std::uint64_t hash_doubles(std::span<const double> values);

}  // namespace w4ax::cli
