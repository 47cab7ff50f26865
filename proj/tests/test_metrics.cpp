#include <doctest.h>

#include <sstream>
#include <string>
#include <vector>

#include "pilot/errors.hpp"
#include "pilot/metrics.hpp"
#include "pilot/sim_runner.hpp"

using namespace pilot;

namespace {

Event ev(Time t, std::string kind, std::string entity, std::string from, std::string to,
         nlohmann::json data = nlohmann::json::object()) {
    Event e;
    e.t = t;
    e.kind = std::move(kind);
    e.entity = std::move(entity);
    e.from = std::move(from);
    e.to = std::move(to);
    e.data = std::move(data);
    return e;
}

PilotDescription sim_pilot(const std::string& id, int cores, std::int64_t walltime,
                           std::int64_t capacity = 1'000'000'000) {
    PilotDescription p;
    p.id = id;
    p.resource = "sim://cluster";
    p.cores = cores;
    p.walltime_s = walltime;
    p.affinity = "site-a";
    p.store_capacity_bytes = capacity;
    return p;
}

ComputeUnitDescription sim_cu(const std::string& id, double duration,
                              std::vector<std::string> inputs = {}) {
    ComputeUnitDescription c;
    c.id = id;
    c.cores = 1;
    c.input_data = std::move(inputs);
    c.sim_duration_s = duration;
    return c;
}

} // namespace

TEST_CASE("a single cu's completion time is run_end minus submit") {
    // Hand-written log, independent of any engine: submitted at 0, done at 7.
    std::vector<Event> events = {
        ev(0, "state", "pilot/p1", "", "NEW", {{"cores", 1}}),
        ev(0, "state", "pilot/p1", "NEW", "QUEUED"),
        ev(0, "state", "pilot/p1", "QUEUED", "RUNNING"),
        ev(0, "state", "cu/c1", "", "NEW", {{"cores", 1}}),
        ev(0, "state", "cu/c1", "NEW", "UNSCHEDULED"),
        ev(2, "state", "cu/c1", "UNSCHEDULED", "PENDING", {{"pilot", "p1"}}),
        ev(2, "state", "cu/c1", "PENDING", "STAGING"),
        ev(2, "state", "cu/c1", "STAGING", "RUNNING"),
        ev(7, "state", "cu/c1", "RUNNING", "DONE"),
        ev(7, "state", "pilot/p1", "RUNNING", "DONE", {{"reason", "run complete"}}),
        ev(7, "stop", "run", "", "",
           {{"reason", "complete"}, {"exceeded", false},
            {"unschedulable", nlohmann::json::array()}}),
    };
    const auto r = emit_metrics(LogHeader{}, events);
    CHECK(r.t_c == 7);
    CHECK(r.stop_reason == "complete");
    CHECK_FALSE(r.exceeded);
    const auto& tl = r.cus.at("c1");
    CHECK(tl.t_submit == 0);
    CHECK(tl.t_bind == 2);
    CHECK(tl.t_stage_start == 2);
    CHECK(tl.t_stage_end == 2);
    CHECK(tl.t_run_start == 2);
    CHECK(tl.t_run_end == 7);
    CHECK(tl.pilot == "p1");
    CHECK(tl.state == "DONE");
    CHECK_FALSE(tl.incomplete);
    // One core busy 5 of the pilot's 7 active seconds.
    CHECK(r.pilots.at("p1").active == 7);
    CHECK(r.pilots.at("p1").busy == 5);
    CHECK(r.pilots.at("p1").utilization == doctest::Approx(5.0 / 7.0));
}

TEST_CASE("two single-core pilots saturate on four five-second cus") {
    SimRunner run;
    run.create_pilot(sim_pilot("p1", 1, 1000));
    run.create_pilot(sim_pilot("p2", 1, 1000));
    for (int i = 1; i <= 4; ++i) run.submit_cu(sim_cu("c" + std::to_string(i), 5));
    REQUIRE(run.wait().all_done());

    const auto r = emit_metrics(run.header(), run.log().snapshot());
    CHECK(r.t_c == 10);
    CHECK(r.bytes_transferred == 0);
    CHECK(r.pilots.at("p1").utilization == doctest::Approx(1.0));
    CHECK(r.pilots.at("p2").utilization == doctest::Approx(1.0));
    CHECK(r.pilots.at("p1").active == 10);
    CHECK(r.pilots.at("p2").active == 10);
}

TEST_CASE("a budget stop flags the report and truncates usage windows") {
    RunOptions opt;
    opt.t_max_s = 8;
    SimRunner run(opt);
    run.create_pilot(sim_pilot("p1", 1, 1000));
    run.submit_cu(sim_cu("c1", 20));
    run.wait();

    const auto r = emit_metrics(run.header(), run.log().snapshot());
    CHECK(r.exceeded);
    CHECK(r.stop_reason == "t_max");
    CHECK(r.stop_t == 8);
    CHECK(r.t_max_s == 8);
    CHECK(r.t_c == 0); // nothing completed
    const auto& tl = r.cus.at("c1");
    CHECK(tl.incomplete);
    CHECK(tl.state == "RUNNING");
    CHECK_FALSE(tl.t_run_end.has_value());
    // Busy and active both run to the stop marker.
    CHECK(r.pilots.at("p1").active == 8);
    CHECK(r.pilots.at("p1").busy == 8);
    CHECK(r.pilots.at("p1").utilization == doctest::Approx(1.0));
}

TEST_CASE("a log without a stop marker is rejected") {
    std::vector<Event> events = {
        ev(0, "state", "cu/c1", "", "NEW", {{"cores", 1}}),
    };
    CHECK_THROWS_AS(emit_metrics(LogHeader{}, events), IncompleteLog);
}

TEST_CASE("transferred bytes sum the transfer events alone") {
    SimRunner run;
    run.create_pilot(sim_pilot("p1", 4, 1000));
    DataUnitDescription d;
    d.id = "d1";
    d.files = {"f.bin"};
    d.size_bytes = 5'000'000;
    d.initial_store = "external";
    run.submit_du(d);
    run.submit_cu(sim_cu("c1", 3, {"d1"}));
    REQUIRE(run.wait().all_done());
    const auto r = emit_metrics(run.header(), run.log().snapshot());
    CHECK(r.bytes_transferred == 5'000'000);
    // Staging shows up in the timeline: 5 s of transfer before the run.
    const auto& tl = r.cus.at("c1");
    CHECK(tl.t_stage_start == 0);
    CHECK(tl.t_stage_end == 5);
    CHECK(tl.t_run_start == 5);
    CHECK(tl.t_run_end == 8);
}

TEST_CASE("retries count and the last attempt owns the timeline") {
    SimRunner run;
    run.create_pilot(sim_pilot("p1", 1, 1000));
    auto c = sim_cu("c1", 2);
    c.sim_fail = true;
    c.max_retries = 1;
    run.submit_cu(c);
    run.wait();
    const auto r = emit_metrics(run.header(), run.log().snapshot());
    const auto& tl = r.cus.at("c1");
    CHECK(tl.retries == 1);
    CHECK(tl.state == "FAILED");
    CHECK_FALSE(tl.incomplete);
    // The surviving milestones all belong to the second attempt.
    CHECK(tl.t_bind == 2);
    CHECK(tl.t_run_start == 2);
    CHECK_FALSE(tl.t_run_end.has_value());
}

TEST_CASE("the report survives a serialization round trip unchanged") {
    SimRunner run;
    run.create_pilot(sim_pilot("p1", 2, 50));
    DataUnitDescription d;
    d.id = "d1";
    d.files = {"f.bin"};
    d.size_bytes = 2'000'000;
    d.initial_store = "external";
    run.submit_du(d);
    run.submit_cu(sim_cu("c1", 3, {"d1"}));
    run.submit_cu(sim_cu("c2", 4));
    run.wait();

    const auto live = emit_metrics(run.header(), run.log().snapshot());

    std::ostringstream os;
    run.log().write_jsonl(os, run.header());
    std::istringstream is(os.str());
    const auto loaded = EventLog::read_jsonl(is);
    const auto replayed = emit_metrics(loaded.header, loaded.events);

    CHECK(to_json(live) == to_json(replayed));
    CHECK(to_json(live).dump() == to_json(replayed).dump());
}

TEST_CASE("timelines are monotone and utilizations bounded on a busy run") {
    SimRunner run;
    run.create_pilot(sim_pilot("p1", 2, 14));
    run.create_pilot(sim_pilot("p2", 1, 1000));
    DataUnitDescription d;
    d.id = "d1";
    d.files = {"f.bin"};
    d.size_bytes = 3'000'000;
    d.initial_store = "external";
    run.submit_du(d);
    for (int i = 1; i <= 6; ++i) {
        auto c = sim_cu("c" + std::to_string(i), 3 + (i % 4));
        if (i % 2 == 0) c.input_data = {"d1"};
        c.max_retries = 1;
        run.submit_cu(c);
    }
    run.wait();
    const auto r = emit_metrics(run.header(), run.log().snapshot());
    for (const auto& [id, tl] : r.cus) {
        auto leq = [](const std::optional<Time>& a, const std::optional<Time>& b) {
            return !a || !b || *a <= *b;
        };
        CHECK(leq(tl.t_submit, tl.t_bind));
        CHECK(leq(tl.t_bind, tl.t_stage_start));
        CHECK(leq(tl.t_stage_start, tl.t_stage_end));
        CHECK(leq(tl.t_stage_end, tl.t_run_start));
        CHECK(leq(tl.t_run_start, tl.t_run_end));
    }
    for (const auto& [id, p] : r.pilots) {
        CHECK(p.utilization >= 0.0);
        CHECK(p.utilization <= 1.0);
    }
    CHECK(r.t_c >= 0);
}
