#pragma once

#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <sys/types.h>

#include "pilot/agent.hpp"
#include "pilot/coordination.hpp"
#include "pilot/data_service.hpp"
#include "pilot/event_log.hpp"
#include "pilot/manifest.hpp"
#include "pilot/registry.hpp"
#include "pilot/runner.hpp"
#include "pilot/scheduler.hpp"
#include "pilot/types.hpp"

namespace pilot {

/// Where a local run keeps its files and finds the workload's.
///
///   run_root/pilots/<pilot>/store/<du>/<files...>   pilot-attached stores
///   run_root/pilots/<pilot>/cu/<cu>/                per-CU workdirs, holding
///       <input du>/<files...>, stdout, stderr, and any <output du>/ the
///       process writes
///
/// DU file paths in descriptions resolve against manifest_dir. An empty
/// run_root gets a fresh directory under the system temp path.
struct LocalPaths {
    std::filesystem::path run_root;
    std::filesystem::path manifest_dir = ".";
};

/// Process-execution twin of SimRunner: same service surface, same scheduler
/// and coordination substrate, but pilots are agent threads on this machine,
/// CUs are real processes (fork/exec, exit code 0 = DONE), stores are
/// directories, and transfers are file copies. Time is wall-clock
/// milliseconds since construction; the log header says so.
///
/// Threads: one manager (scheduling epochs, completion detection, the t_max
/// budget) plus one agent per pilot polling its command queue every 50 ms.
/// All compound state changes happen under one service mutex; agents drop it
/// for sleeps, file copies, and process waits.
class LocalRunner {
public:
    explicit LocalRunner(RunOptions opt = {}, LocalPaths paths = {});
    LocalRunner(const WorkloadManifest& m, RunOptions opt = {}, LocalPaths paths = {});
    ~LocalRunner();

    LocalRunner(const LocalRunner&) = delete;
    LocalRunner& operator=(const LocalRunner&) = delete;

    // -- service surface ----------------------------------------------------
    std::string create_pilot(const PilotDescription& d);
    std::string submit_du(const DataUnitDescription& d);
    std::string submit_cu(const ComputeUnitDescription& d);
    void cancel(EntityKind kind, const std::string& id);

    /// Blocks until every submitted CU is terminal (or provably stuck), the
    /// t_max budget fires, or timeout_s of wall time passes.
    WaitReport wait(std::optional<Time> timeout_s = std::nullopt);

    // -- introspection ------------------------------------------------------
    Time now_ms() const;
    Registry& registry() { return registry_; }
    EventLog& log() { return log_; }
    CoordinationStore& store() { return store_; }
    LogHeader header() const;
    bool finished() const;
    const std::filesystem::path& run_root() const { return paths_.run_root; }

private:
    LocalRunner(RunOptions opt, LocalPaths paths, BandwidthMatrix bandwidth);

    struct ActiveCu {
        pid_t pid = -1;
        int attempt = 0;
    };
    struct LocalAgent {
        std::string pilot_id;
        std::unique_ptr<AdmissionController> admission;
        std::map<std::string, ActiveCu> actives; // RUNNING cu -> its process
        bool live = false;
        Time run_start_ms = 0;
        std::thread thread;
    };
    struct CuRuntime {
        int attempt = 0; // bumped on kill/retry; stale continuations abandon
    };
    struct Deferred {
        ComputeUnitDescription desc;
        Time at_ms = 0;
    };

    // -- threads ------------------------------------------------------------
    void manager_main();
    void agent_main(LocalAgent* agent);

    // -- agent steps (mu_ held unless noted) --------------------------------
    void handle_commands(std::unique_lock<std::mutex>& lk, LocalAgent& agent);
    void reap_exits(std::unique_lock<std::mutex>& lk, LocalAgent& agent);
    void admit_and_start(std::unique_lock<std::mutex>& lk, LocalAgent& agent);
    void stage_and_run(std::unique_lock<std::mutex>& lk, LocalAgent& agent,
                       const std::string& cu_id, int attempt);
    void finish_cu(std::unique_lock<std::mutex>& lk, LocalAgent& agent,
                   const std::string& cu_id, int status);
    void collect_outputs(const std::string& cu_id, const std::string& pilot_id);
    void fail_staging(LocalAgent& agent, const std::string& cu_id, const std::string& reason);
    void shutdown_pilot(LocalAgent& agent, const std::string& cu_fail_reason,
                        const std::string& pilot_to, const std::string& pilot_reason);
    void kill_active(LocalAgent& agent, const std::string& cu_id);
    void maybe_retry(const std::string& cu_id);

    // -- shared helpers (mu_ held) ------------------------------------------
    void submit_cu_now(const ComputeUnitDescription& d, Time t);
    void request_epoch();
    void finalize(const std::string& reason);
    bool workload_complete() const;
    std::map<std::string, bool> can_run_states() const;
    std::vector<Unschedulable> stuck_cus() const;
    std::string next_service_command();

    // -- paths / files (no lock needed) -------------------------------------
    std::filesystem::path pilot_dir(const std::string& pilot_id) const;
    std::filesystem::path store_dir(const std::string& pilot_id, const std::string& du_id) const;
    std::filesystem::path cu_dir(const std::string& pilot_id, const std::string& cu_id) const;
    void copy_du_tree(const std::filesystem::path& from, const std::filesystem::path& to) const;
    pid_t spawn_process(const ComputeUnitDescription& cu,
                        const std::filesystem::path& workdir) const; // throws SpawnFailure

    RunOptions opt_;
    LocalPaths paths_;
    const std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();

    CoordinationStore store_;
    EventLog log_;
    Registry registry_;
    DataService data_;
    Scheduler scheduler_;

    mutable std::mutex mu_;
    std::condition_variable manager_cv_; // epoch requests / stop
    std::condition_variable work_cv_;    // wait() callers
    bool epoch_requested_ = false;
    int waiters_ = 0;
    bool finalized_ = false;
    bool exceeded_ = false;
    std::string stop_reason_;
    Time stop_t_ = 0;

    std::map<std::string, std::unique_ptr<LocalAgent>> agents_;
    std::map<std::string, CuRuntime> curt_;
    std::map<std::string, std::string> produced_by_; // output du -> producer cu
    std::map<std::string, int> du_pulls_;            // concurrent pulls per du
    std::vector<Deferred> deferred_;
    std::set<std::string> pending_cu_ids_;
    std::vector<Unschedulable> unschedulable_;
    std::int64_t next_service_command_ = 0;
    std::thread manager_;
};

} // namespace pilot
