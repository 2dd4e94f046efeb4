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

#include "w4ax/sched_sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>

#include "w4ax/work_stealing.hpp"

namespace w4ax::sim {

void SimConfig::validate() const {
  if (num_sms == 0) throw InputError("simulation needs at least one SM");
  if (cost4 <= 0 || cost8 < cost4) throw InputError("tile costs must satisfy cost8 >= cost4 > 0");
  if (barrier_overhead < 0) throw InputError("barrier overhead must be non-negative");
  if (!(steal_granularity > 0.0 && steal_granularity <= 1.0)) {
    throw InputError("steal granularity must lie in (0, 1]");
  }
}

double SimReport::mean_utilization() const {
  if (utilization.empty()) return 0.0;
  double s = 0.0;
  for (double u : utilization) s += u;
  return s / static_cast<double>(utilization.size());
}

namespace {

struct Piece {
  std::size_t task;
  std::int64_t start;
  std::int64_t end;
  bool stolen;
};

class PhaseEngine {
 public:
  PhaseEngine(const SimConfig& cfg, const std::vector<std::int64_t>& cost, SimReport& report)
      : cfg_(cfg), cost_(cost), report_(report) {}

  // Runs the queued tiles from time t0 until every SM is idle; returns the
  // finishing time (t0 when nothing was queued).
  std::int64_t run(std::int64_t t0, std::vector<std::deque<std::size_t>> queues) {
    const std::size_t S = queues.size();
    std::vector<std::int64_t> queued_work(S, 0);
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t t : queues[s]) queued_work[s] += cost_[t];
    }
    std::vector<std::optional<Piece>> running(S);
    std::int64_t now = t0;
    for (;;) {
      for (std::size_t s = 0; s < S; ++s) {
        if (running[s] || queues[s].empty()) continue;
        const std::size_t t = queues[s].front();
        queues[s].pop_front();
        queued_work[s] -= cost_[t];
        running[s] = Piece{t, now, now + cost_[t], false};
      }
      if (cfg_.stealing) {
        for (std::size_t s = 0; s < S; ++s) {
          if (!running[s]) steal_into(s, now, queues, queued_work, running);
        }
      }

      std::int64_t next = std::numeric_limits<std::int64_t>::max();
      for (const auto& p : running) {
        if (p) next = std::min(next, p->end);
      }
      if (next == std::numeric_limits<std::int64_t>::max()) return now;
      for (std::size_t s = 0; s < S; ++s) {
        if (running[s] && running[s]->end == next) {
          const Piece& p = *running[s];
          report_.timeline.push_back({s, p.task, p.start, p.end, p.stolen});
          report_.busy_time[s] += p.end - p.start;
          running[s].reset();
        }
      }
      now = next;
    }
  }

 private:
  void steal_into(std::size_t thief, std::int64_t now, std::vector<std::deque<std::size_t>>& queues,
                  std::vector<std::int64_t>& queued_work,
                  std::vector<std::optional<Piece>>& running) {
    const std::size_t S = queues.size();
    // a whole queued tile first
    std::size_t victim = S;
    for (std::size_t v = 0; v < S; ++v) {
      if (v != thief && queued_work[v] > 0 && (victim == S || queued_work[v] > queued_work[victim])) {
        victim = v;
      }
    }
    if (victim != S) {
      const std::size_t t = queues[victim].back();
      queues[victim].pop_back();
      queued_work[victim] -= cost_[t];
      running[thief] = Piece{t, now, now + cost_[t], true};
      ++report_.steals;
      return;
    }
    // otherwise split the running tile with the most remaining work
    for (std::size_t v = 0; v < S; ++v) {
      if (v == thief || !running[v]) continue;
      if (victim == S || running[v]->end > running[victim]->end) victim = v;
    }
    if (victim == S) return;
    const std::int64_t remaining = running[victim]->end - now;
    const auto share = static_cast<std::int64_t>(
        std::floor(static_cast<double>(remaining) * cfg_.steal_granularity));
    const std::int64_t amount = std::min(share, remaining - 1);
    if (amount < 1) return;
    running[victim]->end -= amount;
    running[thief] = Piece{running[victim]->task, now, now + amount, true};
    ++report_.steals;
  }

  const SimConfig& cfg_;
  const std::vector<std::int64_t>& cost_;
  SimReport& report_;
};

std::vector<TileTask> as_uniform_w4a8(std::vector<TileTask> tasks) {
  for (auto& t : tasks) {
    t.precision = TilePrecision::kW4A8;
    t.cost_units = 2;
  }
  return tasks;
}

}  // namespace

SimReport simulate(const std::vector<TileTask>& tasks, const SimConfig& cfg) {
  cfg.validate();
  if (tasks.empty()) throw InputError("simulation needs at least one task");
  const std::size_t S = cfg.num_sms;

  std::vector<std::int64_t> cost;
  cost.reserve(tasks.size());
  for (const auto& t : tasks) cost.push_back(cfg.cost_of(t));

  const auto lists = cfg.mapping == Mapping::kRoundRobin
                         ? sched::round_robin_assignment(tasks.size(), S)
                         : sched::lpt_assignment(cost, S);

  SimReport report;
  report.busy_time.assign(S, 0);
  for (std::int64_t c : cost) report.total_work += c;
  PhaseEngine engine(cfg, cost, report);

  std::int64_t end = 0;
  if (cfg.barrier_policy == BarrierPolicy::kFinalOnly) {
    std::vector<std::deque<std::size_t>> queues(S);
    for (std::size_t s = 0; s < S; ++s) queues[s].assign(lists[s].begin(), lists[s].end());
    end = engine.run(0, std::move(queues)) + cfg.barrier_overhead;
  } else {
    std::size_t rounds = 0;
    for (const auto& l : lists) rounds = std::max(rounds, l.size());
    for (std::size_t j = 0; j < rounds; ++j) {
      std::vector<std::deque<std::size_t>> queues(S);
      for (std::size_t s = 0; s < S; ++s) {
        if (j < lists[s].size()) queues[s].push_back(lists[s][j]);
      }
      end = engine.run(end, std::move(queues)) + cfg.barrier_overhead;
    }
  }

  report.makespan = end;
  report.utilization.resize(S);
  for (std::size_t s = 0; s < S; ++s) {
    report.utilization[s] =
        end > 0 ? static_cast<double>(report.busy_time[s]) / static_cast<double>(end) : 0.0;
  }
  std::int64_t busy = 0;
  for (std::int64_t b : report.busy_time) busy += b;
  if (busy != report.total_work) {
    throw ConsistencyError("simulation lost or duplicated work");
  }
  return report;
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kW4A8Uniform:
      return "w4a8-uniform";
    case Strategy::kNaive:
      return "naive";
    case Strategy::kFinalBarrier:
      return "final-barrier";
    case Strategy::kRemap:
      return "remap";
    case Strategy::kStealing:
      return "stealing";
  }
  return "unknown";
}

SimConfig strategy_config(Strategy s, const SimConfig& base) {
  SimConfig cfg = base;
  cfg.barrier_policy = BarrierPolicy::kPerIteration;
  cfg.mapping = Mapping::kRoundRobin;
  cfg.stealing = false;
  switch (s) {
    case Strategy::kW4A8Uniform:
    case Strategy::kNaive:
      break;
    case Strategy::kStealing:
      cfg.stealing = true;
      [[fallthrough]];
    case Strategy::kRemap:
      cfg.mapping = Mapping::kBalancedRemap;
      [[fallthrough]];
    case Strategy::kFinalBarrier:
      cfg.barrier_policy = BarrierPolicy::kFinalOnly;
      break;
  }
  return cfg;
}

std::vector<StrategyRow> compare_strategies(const std::vector<TileTask>& tasks,
                                            const SimConfig& base) {
  const auto uniform = as_uniform_w4a8(tasks);
  const std::int64_t baseline =
      simulate(uniform, strategy_config(Strategy::kW4A8Uniform, base)).makespan;

  std::vector<StrategyRow> rows;
  for (Strategy s : {Strategy::kW4A8Uniform, Strategy::kNaive, Strategy::kFinalBarrier,
                     Strategy::kRemap, Strategy::kStealing}) {
    const SimConfig cfg = strategy_config(s, base);
    const SimReport r = simulate(s == Strategy::kW4A8Uniform ? uniform : tasks, cfg);
    const std::int64_t self = simulate(uniform, cfg).makespan;
    StrategyRow row;
    row.strategy = s;
    row.makespan = r.makespan;
    row.mean_utilization = r.mean_utilization();
    row.speedup = static_cast<double>(baseline) / static_cast<double>(r.makespan);
    row.speedup_vs_self = static_cast<double>(self) / static_cast<double>(r.makespan);
    rows.push_back(row);
  }
  return rows;
}

std::vector<TileTask> workload_from_plan(const gemm::GemmPlan& plan) { return plan.tasks; }

std::vector<TileTask> alternating_workload(std::size_t n) {
  std::vector<TileTask> tasks;
  tasks.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool w8 = i % 2 == 0;
    tasks.push_back({0, 0, i, w8 ? TilePrecision::kW4A8 : TilePrecision::kW4A4, w8 ? 2u : 1u});
  }
  return tasks;
}

std::int64_t per_iteration_makespan_closed_form(const std::vector<TileTask>& tasks,
                                                const SimConfig& cfg) {
  const std::size_t S = cfg.num_sms;
  std::int64_t total = 0;
  for (std::size_t first = 0; first < tasks.size(); first += S) {
    std::int64_t slowest = 0;
    for (std::size_t i = first; i < std::min(tasks.size(), first + S); ++i) {
      slowest = std::max(slowest, cfg.cost_of(tasks[i]));
    }
    total += slowest + cfg.barrier_overhead;
  }
  return total;
}

std::string format_table(const std::vector<StrategyRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(15) << "strategy" << std::right << std::setw(10) << "makespan"
     << std::setw(13) << "utilization" << std::setw(10) << "speedup" << std::setw(14)
     << "vs_same_sched" << '\n';
  os << std::fixed;
  for (const auto& r : rows) {
    os << std::left << std::setw(15) << to_string(r.strategy) << std::right << std::setw(10)
       << r.makespan << std::setw(13) << std::setprecision(3) << r.mean_utilization
       << std::setw(10) << std::setprecision(3) << r.speedup << std::setw(14)
       << std::setprecision(3) << r.speedup_vs_self << '\n';
  }
  return os.str();
}

std::string format_csv(const std::vector<StrategyRow>& rows) {
  std::ostringstream os;
  os << "strategy,makespan,mean_utilization,speedup,speedup_vs_same_schedule\n";
  os << std::setprecision(6);
  for (const auto& r : rows) {
    os << to_string(r.strategy) << ',' << r.makespan << ',' << r.mean_utilization << ','
       << r.speedup << ',' << r.speedup_vs_self << '\n';
  }
  return os.str();
}

}  // namespace w4ax::sim
