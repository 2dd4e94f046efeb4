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

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <vector>

namespace w4ax::sched {

/// Task i goes to worker i % workers.
std::vector<std::vector<std::size_t>> round_robin_assignment(std::size_t num_tasks,
                                                             std::size_t workers);

/// Longest-processing-time greedy: tasks in descending cost (stable by
/// index) go to the least-loaded worker, ties to the lowest worker index.
/// Each worker's list keeps assignment order.
std::vector<std::vector<std::size_t>> lpt_assignment(std::span<const std::int64_t> costs,
                                                     std::size_t workers);

/// Mutex-guarded deque. The owner pushes and pops at the tail; thieves take
/// from the head.
class StealingDeque {
 public:
  void push(std::size_t item) {
    std::lock_guard lock(mu_);
    items_.push_back(item);
  }
  std::optional<std::size_t> pop() {
    std::lock_guard lock(mu_);
    if (items_.empty()) return std::nullopt;
    const std::size_t item = items_.back();
    items_.pop_back();
    return item;
  }
  std::optional<std::size_t> steal() {
    std::lock_guard lock(mu_);
    if (items_.empty()) return std::nullopt;
    const std::size_t item = items_.front();
    items_.pop_front();
    return item;
  }
  std::size_t size() const {
    std::lock_guard lock(mu_);
    return items_.size();
  }

 private:
  mutable std::mutex mu_;
  std::deque<std::size_t> items_;
};

struct PoolStats {
  std::vector<std::size_t> executed_per_worker;
  std::size_t steals = 0;
};

/// Fixed set of work items spread over per-worker deques. No item is added
/// after start, so a worker whose deque is empty and whose steal attempts
/// all fail can retire.
class WorkStealingPool {
 public:
  class Worker {
   public:
    std::size_t id() const noexcept { return id_; }
    /// Next item from the worker's own deque.
    std::optional<std::size_t> pop_local();
    /// One sweep over the other workers, starting at id + 1.
    std::optional<std::size_t> steal();
    /// pop_local, falling back to steal.
    std::optional<std::size_t> next();
    /// Record that an item ran on this worker (for statistics).
    void executed() noexcept { ++pool_->executed_[id_]; }

   private:
    friend class WorkStealingPool;
    Worker(WorkStealingPool* pool, std::size_t id) : pool_(pool), id_(id) {}
    WorkStealingPool* pool_;
    std::size_t id_;
  };

  /// `queues[w]` lists worker w's items in the order the owner should run
  /// them. Runs `body` on `queues.size()` workers (worker 0 on the calling
  /// thread) and rethrows the first exception any worker raised.
  PoolStats run(const std::vector<std::vector<std::size_t>>& queues,
                const std::function<void(Worker&)>& body);

 private:
  std::vector<StealingDeque> deques_;
  std::vector<std::size_t> executed_;
  std::atomic<std::size_t> steals_{0};
};

}  // namespace w4ax::sched
