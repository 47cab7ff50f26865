#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "pilot/coordination.hpp"
#include "pilot/registry.hpp"
#include "pilot/types.hpp"

namespace pilot {

/// How a candidate pilot ranks for one SU. Higher local_bytes wins, then
/// higher affinity_sum, then lower queued_load, then the smaller pilot id —
/// a total order, so binding is deterministic.
struct PlacementScore {
    std::string pilot_id;
    std::int64_t local_bytes = 0; // bytes of input DUs already resident here
    int affinity_sum = 0;         // Σ affinity_distance(pilot, du) over the rest
    int queued_load = 0;          // CUs bound + unfinished on this pilot
};

enum class BindPolicy { Affinity, RoundRobin };
const char* to_string(BindPolicy p);
std::optional<BindPolicy> bind_policy_from(std::string_view s);

struct Binding {
    std::string cu_id;
    std::string pilot_id;
    std::string command_id;
    int epoch = 0;
};

/// Late-binding scheduler: holds one SU per submitted CU, and at each epoch
/// makes a greedy pass in CU submission order over the RUNNING pilots with
/// enough free cores, picking the best PlacementScore (or rotating through
/// candidates under RoundRobin). SUs with no eligible pilot — or whose input
/// DUs have no usable source yet — simply stay unbound until a later epoch.
/// A bound CU moves UNSCHEDULED->PENDING and a RUN_CU command is enqueued to
/// the chosen pilot.
///
/// Epochs run one at a time from a single decision loop; form_su/unbind may
/// be called from other threads (local backend agents).
class Scheduler {
public:
    Scheduler(Registry& registry, CoordinationStore& store,
              BindPolicy policy = BindPolicy::Affinity)
        : registry_(registry), store_(store), policy_(policy) {}

    /// Creates the (single) SU for a CU and moves it NEW->UNSCHEDULED.
    /// Throws DuplicateSU on a second call for the same CU.
    void form_su(const std::string& cu_id, Time t);

    /// Pure evaluation of one pilot for one SU; reads replica placement and
    /// sizes from the registry.
    PlacementScore score(const SchedulableUnit& su, const std::string& pilot_id,
                         int queued_load) const;

    /// One scheduling epoch at time t. Returns the bindings made.
    std::vector<Binding> run_epoch(Time t);

    /// Clears the SU binding after a refund or retry put the CU back to
    /// UNSCHEDULED; the next epoch may place it elsewhere.
    void unbind(const std::string& cu_id);

    SchedulableUnit su(const std::string& cu_id) const; // throws UnknownEntity
    std::vector<std::string> unbound_cus() const;       // submission order
    int epoch() const;

    /// Test hook: deliver every RUN_CU command twice (same command_id) to
    /// exercise agent-side deduplication.
    void set_duplicate_commands(bool on) { duplicate_commands_ = on; }

private:
    bool du_usable(const std::string& du_id) const;
    std::string next_command_id();

    Registry& registry_;
    CoordinationStore& store_;
    BindPolicy policy_;
    bool duplicate_commands_ = false;

    mutable std::mutex mu_; // guards sus_/order_/counters
    std::map<std::string, SchedulableUnit> sus_;
    std::vector<std::string> order_; // CU submission order
    int epoch_ = 0;
    std::size_t rr_cursor_ = 0;
    std::int64_t next_command_ = 0;
};

} // namespace pilot
