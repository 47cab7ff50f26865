#include <doctest.h>

#include <string>
#include <vector>

#include "pilot/agent.hpp"

using namespace pilot;

TEST_CASE("slot board hands out the lowest free indices") {
    SlotBoard b(4);
    CHECK(b.free_cores() == 4);
    auto s1 = b.occupy("c1", 2);
    REQUIRE(s1.has_value());
    CHECK(*s1 == std::vector<int>{0, 1});
    auto s2 = b.occupy("c2", 1);
    REQUIRE(s2.has_value());
    CHECK(*s2 == std::vector<int>{2});
    b.vacate("c1");
    // Freed low indices are reused first.
    auto s3 = b.occupy("c3", 2);
    REQUIRE(s3.has_value());
    CHECK(*s3 == std::vector<int>{0, 1});
    CHECK(b.free_cores() == 1);
}

TEST_CASE("slot board rejects an oversized claim without side effects") {
    SlotBoard b(2);
    REQUIRE(b.occupy("c1", 1).has_value());
    CHECK_FALSE(b.occupy("c2", 2).has_value());
    CHECK(b.free_cores() == 1); // unchanged
    CHECK_FALSE(b.occupies("c2"));
    CHECK(b.slots_of("c1") == std::vector<int>{0});
}

TEST_CASE("vacating an unknown cu is a no-op") {
    SlotBoard b(2);
    b.vacate("ghost");
    CHECK(b.free_cores() == 2);
}

TEST_CASE("admission is strict FIFO with head-of-line blocking") {
    AdmissionController a(2);
    REQUIRE(a.first_delivery("k1"));
    a.enqueue("c1", 1, "k1");
    REQUIRE(a.first_delivery("k2"));
    a.enqueue("c2", 2, "k2"); // too wide once c1 holds a slot
    REQUIRE(a.first_delivery("k3"));
    a.enqueue("c3", 1, "k3"); // would fit, but must wait behind c2

    auto adm = a.admit_ready();
    REQUIRE(adm.size() == 1);
    CHECK(adm[0].cu_id == "c1");
    CHECK(adm[0].command_id == "k1");
    CHECK(adm[0].slots == std::vector<int>{0});
    CHECK(a.queued_cus() == std::vector<std::string>{"c2", "c3"});
    CHECK(a.admit_ready().empty()); // still blocked

    a.release("c1");
    auto adm2 = a.admit_ready();
    REQUIRE(adm2.size() == 1); // c2 takes both cores; c3 blocked again
    CHECK(adm2[0].cu_id == "c2");
    CHECK(adm2[0].slots == std::vector<int>{0, 1});

    a.release("c2");
    auto adm3 = a.admit_ready();
    REQUIRE(adm3.size() == 1);
    CHECK(adm3[0].cu_id == "c3");
}

TEST_CASE("several queued cus admit together when they all fit") {
    AdmissionController a(4);
    a.first_delivery("k1");
    a.enqueue("c1", 1, "k1");
    a.first_delivery("k2");
    a.enqueue("c2", 2, "k2");
    a.first_delivery("k3");
    a.enqueue("c3", 1, "k3");
    auto adm = a.admit_ready();
    REQUIRE(adm.size() == 3);
    CHECK(adm[0].cu_id == "c1");
    CHECK(adm[1].cu_id == "c2");
    CHECK(adm[2].cu_id == "c3");
    CHECK(a.free_cores() == 0);
}

TEST_CASE("duplicate command ids are flagged on delivery") {
    AdmissionController a(1);
    CHECK(a.first_delivery("k1"));
    CHECK_FALSE(a.first_delivery("k1"));
    CHECK_FALSE(a.first_delivery("k1"));
    CHECK(a.first_delivery("k2"));
}

TEST_CASE("a queued cu can be removed before admission") {
    AdmissionController a(1);
    a.first_delivery("k1");
    a.enqueue("c1", 1, "k1");
    a.first_delivery("k2");
    a.enqueue("c2", 1, "k2");
    CHECK(a.is_queued("c2"));
    CHECK(a.remove_queued("c2"));
    CHECK_FALSE(a.remove_queued("c2")); // already gone
    auto adm = a.admit_ready();
    REQUIRE(adm.size() == 1);
    CHECK(adm[0].cu_id == "c1");
    CHECK(a.queued_cus().empty());
}

TEST_CASE("active reflects board occupancy, not queue membership") {
    AdmissionController a(1);
    a.first_delivery("k1");
    a.enqueue("c1", 1, "k1");
    CHECK_FALSE(a.active("c1"));
    a.admit_ready();
    CHECK(a.active("c1"));
    CHECK_FALSE(a.is_queued("c1"));
    a.release("c1");
    CHECK_FALSE(a.active("c1"));
}
