#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "pilot/agent.hpp"
#include "pilot/coordination.hpp"
#include "pilot/data_service.hpp"
#include "pilot/event_log.hpp"
#include "pilot/manifest.hpp"
#include "pilot/registry.hpp"
#include "pilot/runner.hpp"
#include "pilot/scheduler.hpp"
#include "pilot/sim_engine.hpp"
#include "pilot/types.hpp"

namespace pilot {

/// The simulation backend: manager, scheduler, agents, and data movement
/// driven by one single-threaded discrete-event loop over virtual seconds.
/// Nothing in this path reads a wall clock or iterates an unordered
/// container, so a manifest replays to a byte-identical event log.
///
/// Usage: construct (optionally from a manifest), add pilots/DUs/CUs, then
/// wait(). Time starts at 0; pilots pass NEW->QUEUED at creation and reach
/// RUNNING after queue_delay_s. CUs enter the scheduler immediately (or at
/// submit_at_s) and late-bind at event-driven epochs.
class SimRunner {
public:
    explicit SimRunner(RunOptions opt = {});
    SimRunner(const WorkloadManifest& m, RunOptions opt = {});

    /// Service surface. Throws BackendUnavailable (non-sim resource),
    /// DuplicatePilotId / DuplicateCUId / DuplicateDUId, UnknownStore,
    /// CapacityExceeded, UnresolvedDU, MissingDuration.
    std::string create_pilot(const PilotDescription& d);
    std::string submit_du(const DataUnitDescription& d);
    std::string submit_cu(const ComputeUnitDescription& d);

    /// Cancels a CU (unbound: direct CANCELED, no command traffic; bound: a
    /// CANCEL_CU command) or a pilot (SHUTDOWN command; its in-flight CUs
    /// fail with reason "pilot canceled", then the retry policy applies).
    /// Throws UnknownEntity or AlreadyTerminal.
    void cancel(EntityKind kind, const std::string& id);

    /// Scripted cancelation at a future virtual time (races with completion
    /// are expected in scripts, so AlreadyTerminal is swallowed).
    void schedule_cancel(Time t, EntityKind kind, const std::string& id);

    /// Runs the event loop until every CU is terminal or provably stuck
    /// (then the run finalizes: live pilots shut down, a "stop" event is
    /// logged), until the t_max budget stops it, or until the optional
    /// timeout (virtual seconds) runs out — timeout leaves the run resumable
    /// and is reported, not thrown.
    WaitReport wait(std::optional<Time> timeout_s = std::nullopt);

    Time now() const { return engine_.now(); }
    Registry& registry() { return registry_; }
    EventLog& log() { return log_; }
    DataService& data() { return data_; }
    Scheduler& scheduler() { return scheduler_; }
    CoordinationStore& store() { return store_; }
    LogHeader header() const;
    bool finished() const { return finalized_; }

private:
    SimRunner(RunOptions opt, BandwidthMatrix bandwidth);

    struct SimAgent {
        std::unique_ptr<AdmissionController> admission;
        bool live = false;
        Time run_start = 0;
    };
    struct CuRuntime {
        int attempt = 0; // bumps on every admission/cancel; stale events check it
        int waiting = 0; // transfers outstanding while STAGING
    };
    struct InFlight {
        std::string du_id, target, from;
        std::int64_t bytes = 0;
        Time start = 0, end = 0;
        std::vector<std::pair<std::string, int>> waiters; // (cu, attempt)
    };

    void request_epoch();
    void poke_agent(const std::string& pilot_id);
    void on_pilot_running(const std::string& pilot_id);
    void on_agent_poll(const std::string& pilot_id);
    void try_admissions(const std::string& pilot_id);
    void begin_staging(const std::string& cu_id, const std::string& pilot_id);
    void fail_staging(const std::string& cu_id, const std::string& pilot_id);
    void on_transfer_end(const std::string& du_id, const std::string& pilot_id);
    void to_running(const std::string& cu_id, const std::string& pilot_id);
    void on_cu_complete(const std::string& cu_id, int attempt, const std::string& pilot_id);
    void register_outputs(const std::string& cu_id, const std::string& pilot_id);
    void on_walltime(const std::string& pilot_id);
    void shutdown_pilot(const std::string& pilot_id, const std::string& cu_fail_reason,
                        const std::string& pilot_to, const std::string& pilot_reason);
    void cancel_transfers_into(const std::string& pilot_id);
    void cancel_active_cu(const std::string& cu_id, const std::string& pilot_id);
    void maybe_retry(const std::string& cu_id);
    void release_slots(const std::string& cu_id, const std::string& pilot_id);

    std::map<std::string, bool> can_run_states() const; // cu -> could still make progress
    bool workload_complete() const;
    std::vector<Unschedulable> stuck_cus() const;
    void finalize(const std::string& reason);
    std::string next_service_command();

    RunOptions opt_;
    SimQueue engine_;
    CoordinationStore store_;
    EventLog log_;
    Registry registry_;
    DataService data_;
    Scheduler scheduler_;

    std::map<std::string, SimAgent> agents_;
    std::map<std::string, CuRuntime> curt_;
    std::map<std::pair<std::string, std::string>, InFlight> inflight_; // (du, target)
    std::map<std::string, int> du_inflight_;
    std::map<std::string, std::string> produced_by_; // du -> producing cu
    std::set<std::string> pending_cu_ids_;           // deferred submissions not yet created
    std::set<std::string> poll_pending_;
    bool epoch_pending_ = false;

    int pending_submissions_ = 0;
    bool stopping_ = false;
    bool finalized_ = false;
    bool exceeded_ = false;
    std::vector<Unschedulable> unschedulable_;
    std::int64_t next_service_command_ = 0;
};

} // namespace pilot
