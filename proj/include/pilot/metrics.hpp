#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pilot/event_log.hpp"
#include "pilot/runner.hpp"
#include "pilot/types.hpp"

namespace pilot {

/// Milestones of one CU's last attempt. Earlier attempts overwrite nothing
/// once a fresh binding resets the downstream fields, so a finished timeline
/// is non-decreasing left to right (stage_end coincides with run_start).
struct CuTimeline {
    std::optional<Time> t_submit;
    std::optional<Time> t_bind;
    std::optional<Time> t_stage_start;
    std::optional<Time> t_stage_end;
    std::optional<Time> t_run_start;
    std::optional<Time> t_run_end; // successful completion only
    std::string pilot;             // last bound pilot, empty if never bound
    std::string state;             // final recorded state
    int retries = 0;
    bool incomplete = false; // non-terminal when the run stopped
};

struct PilotUsage {
    int cores = 0;
    Time active = 0;     // RUNNING window (truncated at the stop marker)
    Time busy = 0;       // Σ cores × occupancy of its slots
    double utilization = 0.0; // busy / (cores × active), 0 when never active
};

/// The whole report is a pure function of (header, events): recomputing it
/// offline from a saved log gives the identical answer.
struct MetricsReport {
    Time t_c = 0; // max run_end over DONE CUs − min submit; 0 when nothing ran
    std::optional<std::int64_t> t_max_s;
    bool exceeded = false;
    std::int64_t bytes_transferred = 0; // inter-store traffic only
    std::string stop_reason;
    Time stop_t = 0;
    std::map<std::string, CuTimeline> cus;
    std::map<std::string, PilotUsage> pilots;
    std::vector<Unschedulable> unschedulable;
};

/// Folds an event stream into the report. Requires the run's closing "stop"
/// marker; throws IncompleteLog without one.
MetricsReport emit_metrics(const LogHeader& header, const std::vector<Event>& events);

nlohmann::json to_json(const MetricsReport& r);

} // namespace pilot
