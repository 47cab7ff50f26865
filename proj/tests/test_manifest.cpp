#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "pilot/manifest.hpp"

using namespace pilot;

namespace {

WorkloadManifest minimal_sim_manifest() {
    WorkloadManifest m;
    PilotDescription p;
    p.id = "p1";
    p.resource = "sim://site-a";
    p.cores = 2;
    p.walltime_s = 100;
    p.affinity = "site-a";
    p.store_capacity_bytes = 1000;
    m.pilots.push_back(p);

    DataUnitDescription d;
    d.id = "d1";
    d.files = {"input.dat"};
    d.size_bytes = 100;
    d.affinity = "site-a";
    d.initial_store = "p1";
    m.data_units.push_back(d);

    ComputeUnitDescription c;
    c.id = "c1";
    c.input_data = {"d1"};
    c.sim_duration_s = 3;
    m.compute_units.push_back(c);
    return m;
}

bool has_violation(const std::vector<Violation>& vs, const std::string& entity,
                   const std::string& needle) {
    return std::any_of(vs.begin(), vs.end(), [&](const Violation& v) {
        return v.entity == entity && v.rule.find(needle) != std::string::npos;
    });
}

} // namespace

TEST_CASE("a well-formed manifest validates clean") {
    CHECK(validate_manifest(minimal_sim_manifest()).empty());
}

TEST_CASE("dangling input reference is reported against the cu") {
    auto m = minimal_sim_manifest();
    m.compute_units[0].input_data = {"ghost"};
    auto vs = validate_manifest(m);
    CHECK(has_violation(vs, "c1", "ghost"));
}

TEST_CASE("zero cores is caught at the boundary") {
    auto m = minimal_sim_manifest();
    m.pilots[0].cores = 0;
    CHECK(has_violation(validate_manifest(m), "p1", "cores"));
}

TEST_CASE("invalid affinity labels are rejected") {
    auto m = minimal_sim_manifest();
    m.pilots[0].affinity = "site a";
    CHECK(has_violation(validate_manifest(m), "p1", "affinity"));
    m = minimal_sim_manifest();
    m.pilots[0].affinity = ""; // required on pilots
    CHECK(has_violation(validate_manifest(m), "p1", "affinity"));
    m = minimal_sim_manifest();
    m.data_units[0].affinity = ""; // optional on DUs
    CHECK(validate_manifest(m).empty());
}

TEST_CASE("ids must be unique across the whole manifest") {
    auto m = minimal_sim_manifest();
    m.data_units.push_back(m.data_units[0]);
    CHECK(has_violation(validate_manifest(m), "d1", "more than once"));
    m = minimal_sim_manifest();
    m.compute_units[0].id = "p1"; // collides with the pilot
    CHECK(has_violation(validate_manifest(m), "p1", "more than once"));
}

TEST_CASE("sim pilots require sim_duration_s on every cu") {
    auto m = minimal_sim_manifest();
    m.compute_units[0].sim_duration_s.reset();
    CHECK(has_violation(validate_manifest(m), "c1", "sim_duration_s"));
    m = minimal_sim_manifest();
    m.compute_units[0].sim_duration_s = 0.0;
    CHECK(has_violation(validate_manifest(m), "c1", "sim_duration_s"));
}

TEST_CASE("local pilots require an executable and forbid queue_delay") {
    auto m = minimal_sim_manifest();
    m.pilots[0].resource = "local://";
    m.pilots[0].queue_delay_s = 5;
    auto vs = validate_manifest(m);
    CHECK(has_violation(vs, "c1", "executable"));
    CHECK(has_violation(vs, "p1", "queue_delay_s"));
}

TEST_CASE("mixed resource schemes are a manifest-level violation") {
    auto m = minimal_sim_manifest();
    auto p2 = m.pilots[0];
    p2.id = "p2";
    p2.resource = "local://";
    m.pilots.push_back(p2);
    CHECK(has_violation(validate_manifest(m), "", "same resource scheme"));
}

TEST_CASE("file paths must be relative and contained") {
    auto m = minimal_sim_manifest();
    m.data_units[0].files = {"/etc/passwd"};
    CHECK(has_violation(validate_manifest(m), "d1", "relative"));
    m.data_units[0].files = {"a/../../b"};
    CHECK(has_violation(validate_manifest(m), "d1", "relative"));
    m.data_units[0].files = {};
    CHECK(has_violation(validate_manifest(m), "d1", "non-empty"));
}

TEST_CASE("initial_store must name a pilot, external, or be produced") {
    auto m = minimal_sim_manifest();
    m.data_units[0].initial_store = "p9";
    CHECK(has_violation(validate_manifest(m), "d1", "initial_store"));
    m.data_units[0].initial_store = kExternalSource;
    CHECK(validate_manifest(m).empty());
    m.data_units[0].initial_store = "";
    CHECK(has_violation(validate_manifest(m), "d1", "not produced"));
}

TEST_CASE("output DUs must not carry an initial_store and have one producer") {
    auto m = minimal_sim_manifest();
    DataUnitDescription out;
    out.id = "d2";
    out.files = {"out.dat"};
    m.data_units.push_back(out);
    m.compute_units[0].output_data = {"d2"};
    CHECK(validate_manifest(m).empty());

    m.data_units[1].initial_store = "p1";
    CHECK(has_violation(validate_manifest(m), "d2", "output du"));
    m.data_units[1].initial_store = "";

    auto c2 = m.compute_units[0];
    c2.id = "c2";
    m.compute_units.push_back(c2); // second producer of d2
    CHECK(has_violation(validate_manifest(m), "d2", "more than one cu"));
}

TEST_CASE("a du cannot be both input and output of one cu") {
    auto m = minimal_sim_manifest();
    m.compute_units[0].output_data = {"d1"};
    CHECK(has_violation(validate_manifest(m), "d1", "output du must not declare"));
    CHECK(has_violation(validate_manifest(m), "c1", "both input and output"));
}

TEST_CASE("pre-placed data must fit the declared store capacity") {
    auto m = minimal_sim_manifest();
    m.data_units[0].size_bytes = 2000; // capacity is 1000
    CHECK(has_violation(validate_manifest(m), "p1", "capacity"));
}

TEST_CASE("bandwidth matrix must be symmetric and positive") {
    auto m = minimal_sim_manifest();
    m.bandwidth.rates["site-a"]["site-b"] = 10;
    m.bandwidth.rates["site-b"]["site-a"] = 20;
    CHECK(has_violation(validate_manifest(m), "", "asymmetric"));
    m.bandwidth.rates["site-b"]["site-a"] = 10;
    CHECK(validate_manifest(m).empty());
    m.bandwidth.rates["site-a"]["site-c"] = 0;
    CHECK(has_violation(validate_manifest(m), "", "must be > 0"));
}

TEST_CASE("bandwidth lookup is symmetric with a default fallback") {
    BandwidthMatrix bw;
    bw.default_rate = 7;
    bw.rates["a"]["b"] = 3;
    CHECK(bw.rate("a", "b") == 3);
    CHECK(bw.rate("b", "a") == 3);
    CHECK(bw.rate("a", "z") == 7);
}

TEST_CASE("manifest json round-trips") {
    auto m = minimal_sim_manifest();
    m.t_max_s = 500;
    m.seed = 42;
    m.bandwidth.rates["site-a"]["site-b"] = 1000;
    auto j = manifest_to_json(m);
    auto back = manifest_from_json(j);
    CHECK(back.pilots.size() == 1);
    CHECK(back.pilots[0].cores == 2);
    CHECK(back.data_units[0].initial_store == "p1");
    CHECK(back.compute_units[0].sim_duration_s == 3.0);
    CHECK(back.t_max_s == 500);
    CHECK(back.seed == 42);
    CHECK(back.bandwidth.rate("site-b", "site-a") == 1000);
    CHECK(manifest_to_json(back) == j);
}

TEST_CASE("unknown and mistyped fields are parse errors") {
    nlohmann::json j = manifest_to_json(minimal_sim_manifest());
    j["pilots"][0]["coresz"] = 1;
    CHECK_THROWS_AS(manifest_from_json(j), ParseError);
    j = manifest_to_json(minimal_sim_manifest());
    j["pilots"][0]["cores"] = "two";
    CHECK_THROWS_AS(manifest_from_json(j), ParseError);
    j = manifest_to_json(minimal_sim_manifest());
    j["pilots"][0].erase("id");
    CHECK_THROWS_AS(manifest_from_json(j), ParseError);
}

TEST_CASE("parse_manifest reports truncated files with a position") {
    const char* path = "trunc_manifest_test.json";
    {
        std::ofstream out(path);
        out << R"({"pilots": [{"id": "p1")";
    }
    try {
        parse_manifest(path);
        FAIL("expected ParseError");
    } catch (const ParseError& ex) {
        CHECK(std::string(ex.what()).find("unexpected end") != std::string::npos);
    }
    std::remove(path);
}

TEST_CASE("parse_manifest throws ValidationFailed carrying all violations") {
    const char* path = "invalid_manifest_test.json";
    {
        auto m = minimal_sim_manifest();
        m.pilots[0].cores = 0;
        m.compute_units[0].input_data = {"ghost"};
        std::ofstream out(path);
        out << manifest_to_json(m).dump();
    }
    try {
        parse_manifest(path);
        FAIL("expected ValidationFailed");
    } catch (const ValidationFailed& ex) {
        CHECK(ex.violations.size() == 2);
    }
    std::remove(path);
}

TEST_CASE("backend detection follows the pilots") {
    auto m = minimal_sim_manifest();
    CHECK(manifest_backend(m) == BackendKind::Sim);
    m.pilots[0].resource = "local://";
    CHECK(manifest_backend(m) == BackendKind::Local);
    m.pilots.clear();
    CHECK_FALSE(manifest_backend(m).has_value());
}
