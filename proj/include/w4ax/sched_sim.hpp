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

// Discrete-event simulator for mixed-precision tile scheduling on a set of
// streaming multiprocessors (SMs).
//
// Time is integral. A W4A4 tile costs cost4 units, a W4A8 tile cost8. Four
// knobs reproduce the scheduling variants:
//   * barrier policy: per-iteration (every SM waits for the slowest tile of
//     each round) or final-only (one barrier at the end);
//   * mapping: fixed round-robin (tile i -> SM i % S) or balanced remap
//     (longest-processing-time greedy);
//   * stealing: an idle SM first takes a queued tile from the SM with the
//     most queued work, otherwise it splits the running tile with the most
//     remaining work, taking floor(remaining * steal_granularity) units.
// Ties between SMs always break towards the lower index, so every run is
// deterministic.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "w4ax/mp_gemm.hpp"

namespace w4ax::sim {

using gemm::TilePrecision;
using gemm::TileTask;

enum class BarrierPolicy : std::uint8_t { kPerIteration, kFinalOnly };
enum class Mapping : std::uint8_t { kRoundRobin, kBalancedRemap };

struct SimConfig {
  std::size_t num_sms = 4;
  std::int64_t cost4 = 1;
  std::int64_t cost8 = 2;
  BarrierPolicy barrier_policy = BarrierPolicy::kPerIteration;
  Mapping mapping = Mapping::kRoundRobin;
  bool stealing = false;
  std::int64_t barrier_overhead = 0;
  double steal_granularity = 0.5;

  /// Throws InputError unless num_sms >= 1, cost8 >= cost4 > 0,
  /// barrier_overhead >= 0 and 0 < steal_granularity <= 1.
  void validate() const;
  std::int64_t cost_of(const TileTask& t) const noexcept {
    return t.precision == TilePrecision::kW4A8 ? cost8 : cost4;
  }
};

struct TimelineEvent {
  std::size_t sm = 0;
  std::size_t task = 0;  // index into the simulated task list
  std::int64_t start = 0;
  std::int64_t end = 0;
  bool stolen = false;  // piece executed by a thief
};

struct SimReport {
  std::int64_t makespan = 0;
  std::int64_t total_work = 0;
  std::vector<std::int64_t> busy_time;  // per SM
  std::vector<double> utilization;      // busy / makespan per SM
  std::vector<TimelineEvent> timeline;
  std::size_t steals = 0;

  double mean_utilization() const;
};

/// Throws InputError for an empty task list or an invalid config.
SimReport simulate(const std::vector<TileTask>& tasks, const SimConfig& cfg);

enum class Strategy : std::uint8_t {
  kW4A8Uniform,  // every tile at cost8, naive scheduling
  kNaive,        // per-iteration barriers, round-robin
  kFinalBarrier,
  kRemap,
  kStealing,
};

std::string to_string(Strategy s);

/// Config for a strategy, keeping costs, SM count and overheads of `base`.
SimConfig strategy_config(Strategy s, const SimConfig& base);

struct StrategyRow {
  Strategy strategy;
  std::int64_t makespan = 0;
  double mean_utilization = 0.0;
  double speedup = 1.0;          // W4A8-uniform baseline makespan / makespan
  double speedup_vs_self = 1.0;  // same policy on the W4A8-uniform workload / makespan
};

std::vector<StrategyRow> compare_strategies(const std::vector<TileTask>& tasks,
                                            const SimConfig& base);

/// Copies the task list of a plan (costs and precision unchanged).
std::vector<TileTask> workload_from_plan(const gemm::GemmPlan& plan);

/// n tiles alternating W4A8, W4A4, W4A8, ...
std::vector<TileTask> alternating_workload(std::size_t n);

/// Closed form for per-iteration barriers under round-robin mapping:
/// sum over rounds of the slowest tile plus one barrier per round.
std::int64_t per_iteration_makespan_closed_form(const std::vector<TileTask>& tasks,
                                                const SimConfig& cfg);

/// Aligned text table and CSV renderings of a comparison.
std::string format_table(const std::vector<StrategyRow>& rows);
std::string format_csv(const std::vector<StrategyRow>& rows);

}  // namespace w4ax::sim
