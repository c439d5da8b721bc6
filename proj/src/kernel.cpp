#include "softics/kernel.hpp"

#include <algorithm>

namespace softics {

Kernel::Kernel(std::uint64_t seed) : rng_(seed) {}

Timer Kernel::at(SimTime when, Task task) {
  auto cancelled = std::make_shared<bool>(false);
  heap_.push_back(Entry{std::max(when, now_), seq_++, cancelled, std::move(task)});
  std::push_heap(heap_.begin(), heap_.end(), Later{});
  return Timer{cancelled};
}

Timer Kernel::every(SimTime first, Duration period, Task task) {
  auto cancelled = std::make_shared<bool>(false);
  auto shared_task = std::make_shared<Task>(std::move(task));
  auto tick = std::make_shared<std::function<void(SimTime)>>();
  // The self-reference is weak so cancelled chains can be freed.
  std::weak_ptr<std::function<void(SimTime)>> weak_tick = tick;
  *tick = [this, cancelled, shared_task, period, weak_tick](SimTime when) {
    auto self = weak_tick.lock();
    if (!self) return;
    heap_.push_back(Entry{when, seq_++, cancelled, [this, cancelled, shared_task, period, self, when] {
                            (*shared_task)();
                            if (!*cancelled) (*self)(when + period);
                          }});
    std::push_heap(heap_.begin(), heap_.end(), Later{});
  };
  (*tick)(std::max(first, now_));
  return Timer{cancelled};
}

void Kernel::run_until(SimTime end) {
  stopped_ = false;
  while (!heap_.empty() && !stopped_) {
    if (heap_.front().when > end) break;
    std::pop_heap(heap_.begin(), heap_.end(), Later{});
    Entry e = std::move(heap_.back());
    heap_.pop_back();
    if (*e.cancelled) continue;
    now_ = e.when;
    ++executed_;
    e.task();
  }
  if (!stopped_ && now_ < end) now_ = end;
}

std::size_t Kernel::pending() const {
  return static_cast<std::size_t>(
      std::count_if(heap_.begin(), heap_.end(), [](const Entry& e) { return !*e.cancelled; }));
}

}  // namespace softics
