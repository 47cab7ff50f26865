#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pilot {

// One timestamp field, two interpretations: virtual seconds (ticks) under the
// sim backend, monotonic milliseconds since run start under the local backend.
// The log header records which one applies.
using Time = std::int64_t;

inline constexpr const char* kExternalSource = "external";

enum class PilotState { NEW, QUEUED, RUNNING, DONE, FAILED, CANCELED };
enum class CuState { NEW, UNSCHEDULED, PENDING, STAGING, RUNNING, DONE, FAILED, CANCELED };
enum class DuState { NEW, TRANSFERRING, READY, FAILED, REMOVED };

const char* to_string(PilotState s);
const char* to_string(CuState s);
const char* to_string(DuState s);
std::optional<PilotState> pilot_state_from(std::string_view s);
std::optional<CuState> cu_state_from(std::string_view s);
std::optional<DuState> du_state_from(std::string_view s);

bool is_terminal(PilotState s);
bool is_terminal(CuState s);
bool is_terminal(DuState s);

/// Legal edges of the three lifecycle machines. The retry guard on
/// FAILED->UNSCHEDULED (retry_count < max_retries) is enforced by the
/// registry, which knows the counters; these predicates only answer
/// whether the edge exists at all.
bool pilot_edge_legal(PilotState from, PilotState to);
bool cu_edge_legal(CuState from, CuState to);
bool du_edge_legal(DuState from, DuState to);

enum class EntityKind { Pilot, Cu, Du };
const char* to_string(EntityKind k);
std::string entity_key(EntityKind k, std::string_view id); // "pilot/p1", "cu/c1", "du/d1"

// ---------------------------------------------------------------------------
// Affinity labels: hierarchical, slash-separated, e.g. "site-a/rack-1".
// Distance between two labels is the length of their longest common
// component prefix; the empty label is distance 0 from everything.

bool affinity_label_valid(std::string_view label); // empty is NOT valid
std::vector<std::string> affinity_components(std::string_view label);
int affinity_distance(std::string_view a, std::string_view b);
std::string affinity_site(std::string_view label); // first component, "" for empty

// ---------------------------------------------------------------------------
// Descriptions are immutable value objects; all state lives behind the
// coordination store and is mutated only through Registry::transition.

struct PilotDescription {
    std::string id;
    std::string resource;     // "local://" or "sim://<endpoint>"
    int cores = 1;
    std::int64_t walltime_s = 1;
    std::string affinity;     // required, non-empty
    std::int64_t store_capacity_bytes = 0; // 0 = no attached data store
    std::int64_t queue_delay_s = 0;        // sim backend only
};

struct ComputeUnitDescription {
    std::string id;
    std::string executable;   // local backend; ignored by sim
    std::vector<std::string> args;
    int cores = 1;
    std::vector<std::string> input_data;  // DU ids
    std::vector<std::string> output_data; // DU ids
    std::optional<double> sim_duration_s; // required under sim
    bool sim_fail = false;                // sim backend: complete as FAILED("exit")
    int max_retries = 0;
    Time submit_at_s = 0;                 // sim backend: virtual submission time
};

struct DataUnitDescription {
    std::string id;
    std::vector<std::string> files;  // relative paths
    std::int64_t size_bytes = 0;     // declared under sim, computed under local
    std::string affinity;            // may be empty
    // Pre-placement: a pilot id (ingested into that store at submit), the
    // symbolic source "external" (pulled on first staging), or empty when the
    // DU is produced as some CU's output.
    std::string initial_store;
};

/// The scheduler's unit of placement: one CU fused with its resolved input
/// DUs. Exactly one SU exists per CU for its lifetime; unbinding (refund,
/// retry) clears bound_pilot and bind_time together.
struct SchedulableUnit {
    std::string cu_id;
    std::vector<std::string> du_ids; // == CU input_data, order preserved
    std::string bound_pilot;         // empty = unbound
    std::optional<Time> bind_time;
};

/// Resource endpoint schemes.
enum class BackendKind { Sim, Local };
const char* to_string(BackendKind k);
std::optional<BackendKind> resource_backend(std::string_view resource);

} // namespace pilot
