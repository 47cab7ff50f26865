#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pilot/scheduler.hpp"
#include "pilot/types.hpp"

namespace pilot {

struct RunOptions {
    BindPolicy policy = BindPolicy::Affinity;
    std::optional<std::int64_t> seed;  // echoed in the log header
    std::optional<Time> t_max_s;       // run budget; the run stops hard when it hits
    bool duplicate_commands = false;   // test hook: every RUN_CU delivered twice
};

struct Unschedulable {
    std::string cu_id;
    std::string reason; // "cores" (demand exceeds every live pilot) or "data" (inputs unreachable)
};

struct WaitReport {
    std::map<std::string, CuState> cu_states;
    std::vector<Unschedulable> unschedulable;
    bool timed_out = false; // wait() gave up before the run finished
    bool exceeded = false;  // the t_max budget stopped the run
    Time finished_at = 0;

    bool all_done() const {
        for (const auto& [id, s] : cu_states)
            if (s != CuState::DONE) return false;
        return true;
    }
};

} // namespace pilot
