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

#include <atomic>
#include <cstdlib>

#include "w4ax/kernels/kernels.hpp"

namespace w4ax::kernels {
namespace {

const KernelTable* find(std::string_view name) noexcept {
  if (name == "scalar") return &scalar_table();
  if (name == "avx2") return avx2_table();
  if (name == "neon") return neon_table();
  return nullptr;
}

const KernelTable* pick_default() noexcept {
  if (const char* env = std::getenv("W4AX_KERNELS")) {
    if (const KernelTable* t = find(env)) return t;
  }
  if (const KernelTable* t = avx2_table()) return t;
  if (const KernelTable* t = neon_table()) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& current() noexcept {
  static std::atomic<const KernelTable*> table{pick_default()};
  return table;
}

}  // namespace

std::vector<const KernelTable*> available_tables() {
  std::vector<const KernelTable*> out{&scalar_table()};
  if (const KernelTable* t = avx2_table()) out.push_back(t);
  if (const KernelTable* t = neon_table()) out.push_back(t);
  return out;
}

const KernelTable& active() noexcept { return *current().load(std::memory_order_acquire); }

bool select(std::string_view name) noexcept {
  const KernelTable* t = find(name);
  if (t == nullptr) return false;
  current().store(t, std::memory_order_release);
  return true;
}

}  // namespace w4ax::kernels
