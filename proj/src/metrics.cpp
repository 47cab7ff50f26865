#include "pilot/metrics.hpp"

#include <algorithm>

#include "pilot/errors.hpp"

namespace pilot {

namespace {

struct CuFold {
    CuTimeline tl;
    int cores = 1;
    // Open slot occupancy (STAGING or RUNNING) awaiting its closing event.
    std::optional<Time> occupied_since;
    std::string occupied_pilot;
};

struct PilotFold {
    PilotUsage use;
    std::optional<Time> running_since;
};

bool starts_with(const std::string& s, const char* prefix) {
    return s.rfind(prefix, 0) == 0;
}

} // namespace

MetricsReport emit_metrics(const LogHeader& header, const std::vector<Event>& events) {
    MetricsReport r;
    r.t_max_s = header.t_max_s;

    std::map<std::string, CuFold> cus;
    std::map<std::string, PilotFold> pilots;
    bool stopped = false;

    for (const auto& e : events) {
        if (e.kind == "transfer") {
            r.bytes_transferred += e.data.at("bytes").get<std::int64_t>();
            continue;
        }
        if (e.kind == "stop") {
            stopped = true;
            r.stop_t = e.t;
            r.stop_reason = e.data.at("reason").get<std::string>();
            r.exceeded = e.data.at("exceeded").get<bool>();
            for (const auto& u : e.data.at("unschedulable"))
                r.unschedulable.push_back(
                    {u.at("cu").get<std::string>(), u.at("reason").get<std::string>()});
            continue;
        }
        if (e.kind != "state") continue;

        if (starts_with(e.entity, "pilot/")) {
            auto& p = pilots[e.entity.substr(6)];
            if (e.from.empty()) {
                p.use.cores = e.data.value("cores", 1);
            } else if (e.to == "RUNNING") {
                p.running_since = e.t;
            } else if (e.from == "RUNNING" && p.running_since) {
                p.use.active += e.t - *p.running_since;
                p.running_since.reset();
            }
            continue;
        }
        if (!starts_with(e.entity, "cu/")) continue;

        auto& c = cus[e.entity.substr(3)];
        if (e.from.empty()) { // birth
            c.tl.t_submit = e.t;
            c.cores = e.data.value("cores", 1);
            c.tl.state = e.to;
            continue;
        }
        c.tl.state = e.to;
        if (e.to == "PENDING") {
            // A fresh attempt: downstream milestones belong to it alone.
            c.tl.t_bind = e.t;
            c.tl.pilot = e.data.value("pilot", "");
            c.tl.t_stage_start.reset();
            c.tl.t_stage_end.reset();
            c.tl.t_run_start.reset();
            c.tl.t_run_end.reset();
        } else if (e.to == "STAGING") {
            c.tl.t_stage_start = e.t;
            c.occupied_since = e.t;
            c.occupied_pilot = c.tl.pilot;
        } else if (e.to == "RUNNING") {
            c.tl.t_stage_end = e.t;
            c.tl.t_run_start = e.t;
        } else if (e.to == "DONE") {
            c.tl.t_run_end = e.t;
        }
        if (e.from == "FAILED" && e.to == "UNSCHEDULED") c.tl.retries += 1;

        const bool occupies = e.to == "STAGING" || e.to == "RUNNING";
        if (!occupies && c.occupied_since) {
            pilots[c.occupied_pilot].use.busy +=
                static_cast<Time>(c.cores) * (e.t - *c.occupied_since);
            c.occupied_since.reset();
        }
    }

    if (!stopped)
        throw IncompleteLog("event log has no stop marker; the run never finished");

    // Close what the stop marker interrupted (t_max leaves partial timelines).
    for (auto& [id, c] : cus) {
        if (c.occupied_since) {
            pilots[c.occupied_pilot].use.busy +=
                static_cast<Time>(c.cores) * (r.stop_t - *c.occupied_since);
            c.occupied_since.reset();
        }
        c.tl.incomplete = !(c.tl.state == "DONE" || c.tl.state == "FAILED" ||
                            c.tl.state == "CANCELED");
    }
    for (auto& [id, p] : pilots) {
        if (p.running_since) {
            p.use.active += r.stop_t - *p.running_since;
            p.running_since.reset();
        }
        const Time denom = static_cast<Time>(p.use.cores) * p.use.active;
        p.use.utilization =
            denom > 0 ? std::clamp(static_cast<double>(p.use.busy) / static_cast<double>(denom),
                                   0.0, 1.0)
                      : 0.0;
    }

    std::optional<Time> min_submit, max_done;
    for (const auto& [id, c] : cus) {
        if (c.tl.t_submit && (!min_submit || *c.tl.t_submit < *min_submit))
            min_submit = c.tl.t_submit;
        if (c.tl.state == "DONE" && c.tl.t_run_end &&
            (!max_done || *c.tl.t_run_end > *max_done))
            max_done = c.tl.t_run_end;
    }
    r.t_c = (min_submit && max_done) ? *max_done - *min_submit : 0;

    for (auto& [id, c] : cus) r.cus.emplace(id, std::move(c.tl));
    for (auto& [id, p] : pilots) r.pilots.emplace(id, p.use);
    return r;
}

nlohmann::json to_json(const MetricsReport& r) {
    auto opt = [](const std::optional<Time>& t) {
        return t ? nlohmann::json(*t) : nlohmann::json();
    };
    nlohmann::json cus = nlohmann::json::object();
    for (const auto& [id, c] : r.cus) {
        cus[id] = {{"t_submit", opt(c.t_submit)},
                   {"t_bind", opt(c.t_bind)},
                   {"t_stage_start", opt(c.t_stage_start)},
                   {"t_stage_end", opt(c.t_stage_end)},
                   {"t_run_start", opt(c.t_run_start)},
                   {"t_run_end", opt(c.t_run_end)},
                   {"pilot", c.pilot},
                   {"state", c.state},
                   {"retries", c.retries},
                   {"incomplete", c.incomplete}};
    }
    nlohmann::json pilots = nlohmann::json::object();
    for (const auto& [id, p] : r.pilots) {
        pilots[id] = {{"cores", p.cores},
                      {"active_s", p.active},
                      {"busy_core_s", p.busy},
                      {"utilization", p.utilization}};
    }
    nlohmann::json uns = nlohmann::json::array();
    for (const auto& u : r.unschedulable)
        uns.push_back({{"cu", u.cu_id}, {"reason", u.reason}});
    return {{"t_c", r.t_c},
            {"t_max_s", r.t_max_s ? nlohmann::json(*r.t_max_s) : nlohmann::json()},
            {"exceeded", r.exceeded},
            {"bytes_transferred", r.bytes_transferred},
            {"stop_reason", r.stop_reason},
            {"stop_t", r.stop_t},
            {"compute_units", cus},
            {"pilots", pilots},
            {"unschedulable", uns}};
}

} // namespace pilot
