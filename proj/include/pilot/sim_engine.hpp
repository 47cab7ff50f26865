#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

#include "pilot/types.hpp"

namespace pilot {

/// Discrete-event core of the sim backend: a min-heap of (time, insertion
/// sequence) over handler closures. Strictly single-threaded; the virtual
/// clock only moves in tick(), monotonically, and same-time events dispatch
/// in insertion order — the cheapest total order that makes replays
/// deterministic.
class SimQueue {
public:
    using Handler = std::function<void()>;

    /// Schedules a handler; throws CausalityViolation when t is already in
    /// the past.
    void schedule(Time t, Handler fn);

    /// Pops the earliest event, advances the clock, runs the handler, and
    /// returns the new virtual time. Throws EmptyQueue when nothing is left.
    Time tick();

    Time now() const { return now_; }
    bool empty() const { return heap_.empty(); }
    std::size_t pending() const { return heap_.size(); }
    Time next_time() const; // throws EmptyQueue

private:
    struct Item {
        Time t;
        std::int64_t seq;
        Handler fn;
    };
    struct Later {
        bool operator()(const Item& a, const Item& b) const {
            if (a.t != b.t) return a.t > b.t;
            return a.seq > b.seq;
        }
    };
    std::priority_queue<Item, std::vector<Item>, Later> heap_;
    Time now_ = 0;
    std::int64_t next_seq_ = 0;
};

} // namespace pilot
