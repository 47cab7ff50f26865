#include <doctest.h>

#include <random>

#include "pilot/types.hpp"

using namespace pilot;

TEST_CASE("affinity distance on identical labels equals component count") {
    CHECK(affinity_distance("site-a/rack-1", "site-a/rack-1") == 2);
}

TEST_CASE("affinity distance counts the longest common component prefix") {
    CHECK(affinity_distance("site-a/rack-1", "site-a/rack-2") == 1);
    CHECK(affinity_distance("site-a/rack-1/node-3", "site-a/rack-1/node-9") == 2);
    CHECK(affinity_distance("site-a", "site-b") == 0);
    // whole-component matching, not string prefixes
    CHECK(affinity_distance("site-a", "site-ab") == 0);
}

TEST_CASE("empty label is distance zero from everything") {
    CHECK(affinity_distance("site-a", "") == 0);
    CHECK(affinity_distance("", "") == 0);
}

TEST_CASE("affinity distance is symmetric and reflexive over random labels") {
    std::mt19937_64 rng(42);
    auto random_label = [&] {
        static const char alphabet[] =
            "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-";
        std::uniform_int_distribution<int> ncomp(1, 4), clen(1, 6),
            pick(0, sizeof(alphabet) - 2);
        std::string label;
        const int n = ncomp(rng);
        for (int i = 0; i < n; ++i) {
            if (i) label += '/';
            const int len = clen(rng);
            for (int j = 0; j < len; ++j) label += alphabet[pick(rng)];
        }
        return label;
    };
    for (int i = 0; i < 500; ++i) {
        const auto a = random_label();
        const auto b = random_label();
        REQUIRE(affinity_label_valid(a));
        CHECK(affinity_distance(a, b) == affinity_distance(b, a));
        CHECK(affinity_distance(a, a) == static_cast<int>(affinity_components(a).size()));
    }
}

TEST_CASE("affinity label syntax") {
    CHECK(affinity_label_valid("site-a/rack-1"));
    CHECK(affinity_label_valid("a"));
    CHECK(affinity_label_valid("A_9-x/b"));
    CHECK_FALSE(affinity_label_valid(""));
    CHECK_FALSE(affinity_label_valid("/a"));
    CHECK_FALSE(affinity_label_valid("a/"));
    CHECK_FALSE(affinity_label_valid("a//b"));
    CHECK_FALSE(affinity_label_valid("a b"));
    CHECK_FALSE(affinity_label_valid("a/b!"));
    CHECK_FALSE(affinity_label_valid("a.b"));
}

TEST_CASE("affinity site is the first component") {
    CHECK(affinity_site("site-a/rack-1") == "site-a");
    CHECK(affinity_site("solo") == "solo");
    CHECK(affinity_site("").empty());
}

TEST_CASE("pilot lifecycle edges") {
    using P = PilotState;
    CHECK(pilot_edge_legal(P::NEW, P::QUEUED));
    CHECK(pilot_edge_legal(P::QUEUED, P::RUNNING));
    CHECK(pilot_edge_legal(P::RUNNING, P::DONE));
    CHECK(pilot_edge_legal(P::RUNNING, P::FAILED));
    CHECK(pilot_edge_legal(P::RUNNING, P::CANCELED));
    CHECK(pilot_edge_legal(P::NEW, P::CANCELED));
    CHECK(pilot_edge_legal(P::QUEUED, P::CANCELED));
    CHECK_FALSE(pilot_edge_legal(P::NEW, P::RUNNING));
    CHECK_FALSE(pilot_edge_legal(P::DONE, P::RUNNING));
    CHECK_FALSE(pilot_edge_legal(P::CANCELED, P::QUEUED));
    CHECK_FALSE(pilot_edge_legal(P::FAILED, P::DONE));
}

TEST_CASE("cu lifecycle edges") {
    using C = CuState;
    CHECK(cu_edge_legal(C::NEW, C::UNSCHEDULED));
    CHECK(cu_edge_legal(C::UNSCHEDULED, C::PENDING));
    CHECK(cu_edge_legal(C::PENDING, C::STAGING));
    CHECK(cu_edge_legal(C::PENDING, C::UNSCHEDULED)); // refund on walltime/cancel
    CHECK(cu_edge_legal(C::STAGING, C::RUNNING));
    CHECK(cu_edge_legal(C::STAGING, C::FAILED));
    CHECK(cu_edge_legal(C::RUNNING, C::DONE));
    CHECK(cu_edge_legal(C::RUNNING, C::FAILED));
    CHECK(cu_edge_legal(C::FAILED, C::UNSCHEDULED)); // retry; registry gates the count
    for (auto s : {C::NEW, C::UNSCHEDULED, C::PENDING, C::STAGING, C::RUNNING})
        CHECK(cu_edge_legal(s, C::CANCELED));
    CHECK_FALSE(cu_edge_legal(C::UNSCHEDULED, C::RUNNING));
    CHECK_FALSE(cu_edge_legal(C::NEW, C::PENDING));
    CHECK_FALSE(cu_edge_legal(C::DONE, C::UNSCHEDULED));
    CHECK_FALSE(cu_edge_legal(C::DONE, C::CANCELED));
    CHECK_FALSE(cu_edge_legal(C::CANCELED, C::UNSCHEDULED));
    CHECK_FALSE(cu_edge_legal(C::RUNNING, C::PENDING));
}

TEST_CASE("du lifecycle edges") {
    using D = DuState;
    CHECK(du_edge_legal(D::NEW, D::TRANSFERRING));
    CHECK(du_edge_legal(D::NEW, D::READY));
    CHECK(du_edge_legal(D::NEW, D::FAILED));
    CHECK(du_edge_legal(D::TRANSFERRING, D::READY));
    CHECK(du_edge_legal(D::TRANSFERRING, D::FAILED));
    CHECK(du_edge_legal(D::READY, D::TRANSFERRING)); // replication adds a copy
    CHECK(du_edge_legal(D::READY, D::REMOVED));
    CHECK_FALSE(du_edge_legal(D::REMOVED, D::READY));
    CHECK_FALSE(du_edge_legal(D::FAILED, D::READY));
    CHECK_FALSE(du_edge_legal(D::NEW, D::REMOVED));
}

TEST_CASE("terminal states") {
    CHECK(is_terminal(PilotState::DONE));
    CHECK(is_terminal(PilotState::FAILED));
    CHECK(is_terminal(PilotState::CANCELED));
    CHECK_FALSE(is_terminal(PilotState::RUNNING));
    CHECK(is_terminal(CuState::DONE));
    CHECK(is_terminal(CuState::FAILED));
    CHECK(is_terminal(CuState::CANCELED));
    CHECK_FALSE(is_terminal(CuState::STAGING));
    CHECK(is_terminal(DuState::FAILED));
    CHECK(is_terminal(DuState::REMOVED));
    CHECK_FALSE(is_terminal(DuState::READY));
}

TEST_CASE("state names round-trip") {
    for (auto s : {CuState::NEW, CuState::UNSCHEDULED, CuState::PENDING, CuState::STAGING,
                   CuState::RUNNING, CuState::DONE, CuState::FAILED, CuState::CANCELED})
        CHECK(cu_state_from(to_string(s)) == s);
    for (auto s : {PilotState::NEW, PilotState::QUEUED, PilotState::RUNNING, PilotState::DONE,
                   PilotState::FAILED, PilotState::CANCELED})
        CHECK(pilot_state_from(to_string(s)) == s);
    for (auto s : {DuState::NEW, DuState::TRANSFERRING, DuState::READY, DuState::FAILED,
                   DuState::REMOVED})
        CHECK(du_state_from(to_string(s)) == s);
    CHECK_FALSE(cu_state_from("BOGUS").has_value());
}

TEST_CASE("entity keys") {
    CHECK(entity_key(EntityKind::Pilot, "p1") == "pilot/p1");
    CHECK(entity_key(EntityKind::Cu, "c1") == "cu/c1");
    CHECK(entity_key(EntityKind::Du, "d1") == "du/d1");
}

TEST_CASE("resource strings map to backends") {
    CHECK(resource_backend("local://") == BackendKind::Local);
    CHECK(resource_backend("local://anything") == BackendKind::Local);
    CHECK(resource_backend("sim://site-a") == BackendKind::Sim);
    CHECK_FALSE(resource_backend("ssh://host").has_value());
    CHECK_FALSE(resource_backend("").has_value());
}
