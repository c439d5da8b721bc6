#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "softics/event_log.hpp"
#include "softics/types.hpp"

namespace softics {

// Handle to a scheduled task; cancelling is idempotent.
class Timer {
 public:
  Timer() = default;
  explicit Timer(std::shared_ptr<bool> cancelled) : cancelled_(std::move(cancelled)) {}

  void cancel() {
    if (cancelled_) *cancelled_ = true;
  }
  bool active() const { return cancelled_ && !*cancelled_; }

 private:
  std::shared_ptr<bool> cancelled_;
};

// Single-threaded discrete-event scheduler with one virtual clock. Tasks at
// equal times run in scheduling order, which makes every run reproducible.
class Kernel {
 public:
  using Task = std::function<void()>;

  explicit Kernel(std::uint64_t seed = 1);

  SimTime now() const { return now_; }

  Timer at(SimTime when, Task task);
  Timer after(Duration delay, Task task) { return at(now_ + delay, std::move(task)); }
  // Runs `task` at first, first + period, ... until the timer is cancelled.
  Timer every(SimTime first, Duration period, Task task);

  // Runs all tasks scheduled at or before `end`, then parks the clock at `end`.
  void run_until(SimTime end);
  // Requests run_until to return after the current task.
  void stop() { stopped_ = true; }
  bool stopped() const { return stopped_; }

  std::size_t pending() const;
  std::uint64_t executed() const { return executed_; }

  // Raw engine output is specified by the standard, so values are portable.
  std::uint64_t random() { return rng_(); }
  std::uint64_t random_below(std::uint64_t bound) { return bound == 0 ? 0 : rng_() % bound; }

  EventLog& log() { return log_; }
  const EventLog& log() const { return log_; }

 private:
  struct Entry {
    SimTime when;
    std::uint64_t seq;
    std::shared_ptr<bool> cancelled;
    Task task;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      return a.when != b.when ? a.when > b.when : a.seq > b.seq;
    }
  };

  SimTime now_{0};
  std::uint64_t seq_ = 0;
  std::uint64_t executed_ = 0;
  bool stopped_ = false;
  std::vector<Entry> heap_;
  std::mt19937_64 rng_;
  EventLog log_;
};

}  // namespace softics
