#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pilot/coordination.hpp"
#include "pilot/event_log.hpp"
#include "pilot/types.hpp"

namespace pilot {

struct PilotRecord {
    PilotState state = PilotState::NEW;
};

struct CuRecord {
    CuState state = CuState::NEW;
    int retry_count = 0;
    std::string pilot; // bound pilot, empty when unbound
};

struct DuRecord {
    DuState state = DuState::NEW;
    std::set<std::string> replicas; // pilot ids, plus "external" when sourced there
    std::int64_t bytes = 0;         // effective size (declared, or measured locally)
};

/// The single gatekeeper for all three lifecycle machines. Entity state lives
/// in the coordination store as versioned records; every mutation goes
/// through a CAS loop here, so transitions are linearizable per entity, and
/// every successful transition lands in the event log. Descriptions are
/// registered once at creation and immutable afterwards.
class Registry {
public:
    Registry(CoordinationStore& store, EventLog& log) : store_(store), log_(log) {}

    void create_pilot(const PilotDescription& d, Time t);
    void create_cu(const ComputeUnitDescription& d, Time t);
    void create_du(const DataUnitDescription& d, Time t);

    /// Applies from->to for the entity. Throws UnknownEntity, IllegalTransition
    /// (edge absent from the machine, or a retry past max_retries), StaleFrom
    /// (current state differs from from — a lost race, re-read and retry at the
    /// caller's discretion). Extra side effects by edge:
    ///   CU UNSCHEDULED->PENDING   stores data["pilot"] as the binding
    ///   CU PENDING->UNSCHEDULED   clears the binding (refund, no retry charge)
    ///   CU FAILED->UNSCHEDULED    clears the binding, increments retry_count
    ///   CU reaching any terminal  clears nothing (the final record keeps the pilot)
    Event transition(EntityKind kind, const std::string& id, std::string_view from,
                     std::string_view to, Time t,
                     nlohmann::json data = nlohmann::json::object());

    /// Adds a complete replica to a DU without an inter-store transfer
    /// (ingest at submit, output registration). Logged as a "replica" event.
    Event du_add_replica(const std::string& id, const std::string& location,
                         std::int64_t bytes, Time t, const std::string& origin);

    /// Replica bookkeeping for a completed transfer; the corresponding
    /// "transfer" event is appended by the caller, which owns the record.
    void du_merge_replica(const std::string& id, const std::string& location);

    PilotRecord pilot_record(const std::string& id) const;
    CuRecord cu_record(const std::string& id) const;
    DuRecord du_record(const std::string& id) const;
    bool exists(EntityKind kind, const std::string& id) const;

    const PilotDescription& pilot_desc(const std::string& id) const;
    const ComputeUnitDescription& cu_desc(const std::string& id) const;
    const DataUnitDescription& du_desc(const std::string& id) const;
    bool has_pilot_desc(const std::string& id) const;
    bool has_cu_desc(const std::string& id) const;
    bool has_du_desc(const std::string& id) const;
    std::vector<std::string> pilot_ids() const; // registration order
    std::vector<std::string> cu_ids() const;    // submission order
    std::vector<std::string> du_ids() const;

    EventLog& log() { return log_; }

private:
    CoordinationStore& store_;
    EventLog& log_;

    mutable std::mutex mu_; // guards description maps
    std::map<std::string, PilotDescription> pilots_;
    std::map<std::string, ComputeUnitDescription> cus_;
    std::map<std::string, DataUnitDescription> dus_;
    std::vector<std::string> pilot_order_, cu_order_, du_order_;
};

} // namespace pilot
