#include <doctest.h>

#include "pilot/errors.hpp"
#include "pilot/registry.hpp"

using namespace pilot;

namespace {

struct Fixture {
    CoordinationStore store;
    EventLog log;
    Registry reg{store, log};
};

PilotDescription make_pilot(const std::string& id) {
    PilotDescription p;
    p.id = id;
    p.resource = "sim://site-a";
    p.cores = 2;
    p.walltime_s = 100;
    p.affinity = "site-a";
    return p;
}

ComputeUnitDescription make_cu(const std::string& id, int max_retries = 0) {
    ComputeUnitDescription c;
    c.id = id;
    c.sim_duration_s = 3;
    c.max_retries = max_retries;
    return c;
}

} // namespace

TEST_CASE("creation seeds state NEW and logs the birth event") {
    Fixture f;
    f.reg.create_pilot(make_pilot("p1"), 0);
    f.reg.create_cu(make_cu("c1"), 0);
    DataUnitDescription d;
    d.id = "d1";
    d.files = {"a.dat"};
    d.size_bytes = 10;
    d.initial_store = "p1";
    f.reg.create_du(d, 0);

    CHECK(f.reg.pilot_record("p1").state == PilotState::NEW);
    CHECK(f.reg.cu_record("c1").state == CuState::NEW);
    CHECK(f.reg.du_record("d1").state == DuState::NEW);
    CHECK(f.reg.du_record("d1").bytes == 10);

    auto events = f.log.snapshot();
    REQUIRE(events.size() == 3);
    CHECK(events[0].entity == "pilot/p1");
    CHECK(events[0].from.empty());
    CHECK(events[0].to == "NEW");
    CHECK(events[0].data.at("cores") == 2);
}

TEST_CASE("duplicate ids are rejected at creation") {
    Fixture f;
    f.reg.create_pilot(make_pilot("p1"), 0);
    CHECK_THROWS_AS(f.reg.create_pilot(make_pilot("p1"), 0), DuplicatePilotId);
    f.reg.create_cu(make_cu("c1"), 0);
    CHECK_THROWS_AS(f.reg.create_cu(make_cu("c1"), 0), DuplicateCUId);
}

TEST_CASE("legal transition is recorded with its event") {
    Fixture f;
    f.reg.create_cu(make_cu("c1"), 0);
    f.reg.transition(EntityKind::Cu, "c1", "NEW", "UNSCHEDULED", 1);
    auto e = f.reg.transition(EntityKind::Cu, "c1", "UNSCHEDULED", "PENDING", 5,
                              {{"pilot", "p1"}});
    CHECK(e.from == "UNSCHEDULED");
    CHECK(e.to == "PENDING");
    CHECK(e.t == 5);
    CHECK(f.reg.cu_record("c1").state == CuState::PENDING);
    CHECK(f.reg.cu_record("c1").pilot == "p1");
}

TEST_CASE("edges absent from the machine throw IllegalTransition") {
    Fixture f;
    f.reg.create_cu(make_cu("c1"), 0);
    f.reg.transition(EntityKind::Cu, "c1", "NEW", "UNSCHEDULED", 1);
    CHECK_THROWS_AS(f.reg.transition(EntityKind::Cu, "c1", "UNSCHEDULED", "RUNNING", 2),
                    IllegalTransition);
    CHECK(f.reg.cu_record("c1").state == CuState::UNSCHEDULED);
}

TEST_CASE("a lost race surfaces as StaleFrom") {
    Fixture f;
    f.reg.create_pilot(make_pilot("p1"), 0);
    f.reg.transition(EntityKind::Pilot, "p1", "NEW", "QUEUED", 1);
    f.reg.transition(EntityKind::Pilot, "p1", "QUEUED", "RUNNING", 2);
    // Writer A cancels; writer B still believes the pilot is RUNNING.
    f.reg.transition(EntityKind::Pilot, "p1", "RUNNING", "CANCELED", 8);
    CHECK_THROWS_AS(f.reg.transition(EntityKind::Pilot, "p1", "RUNNING", "DONE", 9),
                    StaleFrom);
    CHECK(f.reg.pilot_record("p1").state == PilotState::CANCELED);
}

TEST_CASE("transition on an unknown entity throws") {
    Fixture f;
    CHECK_THROWS_AS(f.reg.transition(EntityKind::Cu, "ghost", "NEW", "UNSCHEDULED", 0),
                    UnknownEntity);
}

TEST_CASE("retries are gated by max_retries and increment exactly once per edge") {
    Fixture f;
    f.reg.create_cu(make_cu("c1", 1), 0);
    auto drive_to_failed = [&](const char* from_first) {
        f.reg.transition(EntityKind::Cu, "c1", from_first, "PENDING", 1, {{"pilot", "p1"}});
        f.reg.transition(EntityKind::Cu, "c1", "PENDING", "STAGING", 2);
        f.reg.transition(EntityKind::Cu, "c1", "STAGING", "RUNNING", 3);
        f.reg.transition(EntityKind::Cu, "c1", "RUNNING", "FAILED", 4);
    };
    f.reg.transition(EntityKind::Cu, "c1", "NEW", "UNSCHEDULED", 0);
    drive_to_failed("UNSCHEDULED");
    CHECK(f.reg.cu_record("c1").retry_count == 0);

    auto e = f.reg.transition(EntityKind::Cu, "c1", "FAILED", "UNSCHEDULED", 5);
    CHECK(e.data.at("retry") == 1);
    CHECK(f.reg.cu_record("c1").retry_count == 1);
    CHECK(f.reg.cu_record("c1").pilot.empty()); // binding cleared for re-binding

    drive_to_failed("UNSCHEDULED");
    CHECK_THROWS_AS(f.reg.transition(EntityKind::Cu, "c1", "FAILED", "UNSCHEDULED", 9),
                    IllegalTransition); // budget of 1 exhausted
    CHECK(f.reg.cu_record("c1").state == CuState::FAILED);
}

TEST_CASE("with max_retries zero the retry edge is refused outright") {
    Fixture f;
    f.reg.create_cu(make_cu("c1", 0), 0);
    f.reg.transition(EntityKind::Cu, "c1", "NEW", "UNSCHEDULED", 0);
    f.reg.transition(EntityKind::Cu, "c1", "UNSCHEDULED", "PENDING", 1, {{"pilot", "p1"}});
    f.reg.transition(EntityKind::Cu, "c1", "PENDING", "STAGING", 1);
    f.reg.transition(EntityKind::Cu, "c1", "STAGING", "FAILED", 2);
    CHECK_THROWS_AS(f.reg.transition(EntityKind::Cu, "c1", "FAILED", "UNSCHEDULED", 3),
                    IllegalTransition);
}

TEST_CASE("a pending refund clears the binding without charging a retry") {
    Fixture f;
    f.reg.create_cu(make_cu("c1"), 0);
    f.reg.transition(EntityKind::Cu, "c1", "NEW", "UNSCHEDULED", 0);
    f.reg.transition(EntityKind::Cu, "c1", "UNSCHEDULED", "PENDING", 1, {{"pilot", "p1"}});
    f.reg.transition(EntityKind::Cu, "c1", "PENDING", "UNSCHEDULED", 2);
    auto r = f.reg.cu_record("c1");
    CHECK(r.state == CuState::UNSCHEDULED);
    CHECK(r.pilot.empty());
    CHECK(r.retry_count == 0);
}

TEST_CASE("replica bookkeeping merges stores and logs replica events") {
    Fixture f;
    DataUnitDescription d;
    d.id = "d1";
    d.files = {"x"};
    d.size_bytes = 5;
    f.reg.create_du(d, 0);
    f.reg.transition(EntityKind::Du, "d1", "NEW", "READY", 0);
    auto e = f.reg.du_add_replica("d1", "p1", 5, 0, "ingest");
    CHECK(e.kind == "replica");
    CHECK(e.data.at("store") == "p1");
    f.reg.du_merge_replica("d1", "p2");
    auto r = f.reg.du_record("d1");
    CHECK(r.replicas == std::set<std::string>{"p1", "p2"});
    CHECK(r.bytes == 5);
}

TEST_CASE("descriptions are immutable and listed in registration order") {
    Fixture f;
    f.reg.create_cu(make_cu("c2"), 0);
    f.reg.create_cu(make_cu("c1"), 0);
    CHECK(f.reg.cu_ids() == std::vector<std::string>{"c2", "c1"});
    CHECK(f.reg.cu_desc("c1").max_retries == 0);
    CHECK_THROWS_AS(f.reg.cu_desc("ghost"), UnknownEntity);
    CHECK(f.reg.has_cu_desc("c2"));
    CHECK_FALSE(f.reg.has_du_desc("c2"));
}
