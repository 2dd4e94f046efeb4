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

#include "w4ax/work_stealing.hpp"

#include <algorithm>
#include <numeric>

#include "w4ax/common.hpp"

namespace w4ax::sched {

std::vector<std::vector<std::size_t>> round_robin_assignment(std::size_t num_tasks,
                                                             std::size_t workers) {
  if (workers == 0) throw InputError("need at least one worker");
  std::vector<std::vector<std::size_t>> out(workers);
  for (std::size_t i = 0; i < num_tasks; ++i) out[i % workers].push_back(i);
  return out;
}

std::vector<std::vector<std::size_t>> lpt_assignment(std::span<const std::int64_t> costs,
                                                     std::size_t workers) {
  if (workers == 0) throw InputError("need at least one worker");
  std::vector<std::size_t> order(costs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return costs[a] > costs[b]; });
  std::vector<std::vector<std::size_t>> out(workers);
  std::vector<std::int64_t> load(workers, 0);
  for (std::size_t task : order) {
    const auto w = static_cast<std::size_t>(std::min_element(load.begin(), load.end()) - load.begin());
    out[w].push_back(task);
    load[w] += costs[task];
  }
  return out;
}

std::optional<std::size_t> WorkStealingPool::Worker::pop_local() {
  return pool_->deques_[id_].pop();
}

std::optional<std::size_t> WorkStealingPool::Worker::steal() {
  const std::size_t n = pool_->deques_.size();
  for (std::size_t off = 1; off < n; ++off) {
    if (auto item = pool_->deques_[(id_ + off) % n].steal()) {
      pool_->steals_.fetch_add(1, std::memory_order_relaxed);
      return item;
    }
  }
  return std::nullopt;
}

std::optional<std::size_t> WorkStealingPool::Worker::next() {
  if (auto item = pop_local()) return item;
  return steal();
}

PoolStats WorkStealingPool::run(const std::vector<std::vector<std::size_t>>& queues,
                                const std::function<void(Worker&)>& body) {
  const std::size_t n = queues.size();
  if (n == 0) throw InputError("need at least one worker");
  deques_ = std::vector<StealingDeque>(n);
  executed_.assign(n, 0);
  steals_.store(0);
  for (std::size_t w = 0; w < n; ++w) {
    // owner pops the tail, so push in reverse to run in listed order
    for (auto it = queues[w].rbegin(); it != queues[w].rend(); ++it) deques_[w].push(*it);
  }

  std::vector<std::exception_ptr> errors(n);
  auto run_worker = [&](std::size_t w) {
    try {
      Worker worker(this, w);
      body(worker);
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  {
    std::vector<std::jthread> threads;
    threads.reserve(n - 1);
    for (std::size_t w = 1; w < n; ++w) threads.emplace_back(run_worker, w);
    run_worker(0);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return PoolStats{executed_, steals_.load()};
}

}  // namespace w4ax::sched
