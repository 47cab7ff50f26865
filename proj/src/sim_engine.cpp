#include "pilot/sim_engine.hpp"

#include <utility>

#include "pilot/errors.hpp"

namespace pilot {

void SimQueue::schedule(Time t, Handler fn) {
    if (t < now_)
        throw CausalityViolation("event at t=" + std::to_string(t) +
                                 " is before the clock at t=" + std::to_string(now_));
    heap_.push({t, next_seq_++, std::move(fn)});
}

Time SimQueue::tick() {
    if (heap_.empty()) throw EmptyQueue("no events pending");
    Item item = heap_.top(); // copies the closure; cheap at our event sizes
    heap_.pop();
    now_ = item.t;
    item.fn();
    return now_;
}

Time SimQueue::next_time() const {
    if (heap_.empty()) throw EmptyQueue("no events pending");
    return heap_.top().t;
}

} // namespace pilot
