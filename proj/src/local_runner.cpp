#include "pilot/local_runner.hpp"

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <stdexcept>

#include <fcntl.h>
#include <signal.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include "pilot/errors.hpp"

namespace fs = std::filesystem;
using namespace std::chrono_literals;

namespace pilot {

namespace {

constexpr auto kPollInterval = 50ms;

std::int64_t tree_bytes(const fs::path& p) {
    if (fs::is_regular_file(p)) return static_cast<std::int64_t>(fs::file_size(p));
    std::int64_t total = 0;
    if (fs::is_directory(p))
        for (const auto& e : fs::recursive_directory_iterator(p))
            if (e.is_regular_file()) total += static_cast<std::int64_t>(e.file_size());
    return total;
}

int wait_for_pid(pid_t pid) {
    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    return status;
}

} // namespace

// ---------------------------------------------------------------------------
// construction / teardown

LocalRunner::LocalRunner(RunOptions opt, LocalPaths paths)
    : LocalRunner(std::move(opt), std::move(paths), BandwidthMatrix{}) {}

LocalRunner::LocalRunner(RunOptions opt, LocalPaths paths, BandwidthMatrix bandwidth)
    : opt_(std::move(opt)),
      paths_(std::move(paths)),
      registry_(store_, log_),
      data_(registry_, std::move(bandwidth)),
      scheduler_(registry_, store_, opt_.policy) {
    scheduler_.set_duplicate_commands(opt_.duplicate_commands);
    if (paths_.run_root.empty()) {
        std::string tmpl = (fs::temp_directory_path() / "pilot-run-XXXXXX").string();
        if (::mkdtemp(tmpl.data()) == nullptr)
            throw std::runtime_error("cannot create run directory: " +
                                     std::string(std::strerror(errno)));
        paths_.run_root = tmpl;
    } else {
        fs::create_directories(paths_.run_root);
    }
    manager_ = std::thread(&LocalRunner::manager_main, this);
}

LocalRunner::LocalRunner(const WorkloadManifest& m, RunOptions opt, LocalPaths paths)
    : LocalRunner(
          [&] {
              if (!opt.seed && m.seed) opt.seed = m.seed;
              if (!opt.t_max_s && m.t_max_s) opt.t_max_s = m.t_max_s;
              return opt;
          }(),
          std::move(paths),
          // Rates only rank replica sources here; transfer speed is whatever
          // the disk does.
          m.bandwidth) {
    for (const auto& p : m.pilots) create_pilot(p);
    for (const auto& d : m.data_units) submit_du(d);
    for (const auto& c : m.compute_units) submit_cu(c);
}

LocalRunner::~LocalRunner() {
    {
        std::unique_lock<std::mutex> lk(mu_);
        if (!finalized_) finalize("aborted");
    }
    manager_cv_.notify_all();
    if (manager_.joinable()) manager_.join();
    for (auto& [id, agent] : agents_)
        if (agent->thread.joinable()) agent->thread.join();
}

Time LocalRunner::now_ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start_)
        .count();
}

LogHeader LocalRunner::header() const {
    LogHeader h;
    h.backend = "local";
    h.time_unit = "ms";
    h.seed = opt_.seed;
    h.t_max_s = opt_.t_max_s;
    h.policy = to_string(opt_.policy);
    return h;
}

bool LocalRunner::finished() const {
    std::unique_lock<std::mutex> lk(mu_);
    return finalized_;
}

// ---------------------------------------------------------------------------
// service surface

std::string LocalRunner::create_pilot(const PilotDescription& d) {
    if (resource_backend(d.resource) != BackendKind::Local)
        throw BackendUnavailable("local runner cannot start resource '" + d.resource + "'");
    std::unique_lock<std::mutex> lk(mu_);
    const Time t = now_ms();
    registry_.create_pilot(d, t); // throws DuplicatePilotId
    store_.register_pilot(d.id);
    fs::create_directories(pilot_dir(d.id) / "store");
    fs::create_directories(pilot_dir(d.id) / "cu");

    auto agent = std::make_unique<LocalAgent>();
    agent->pilot_id = d.id;
    agent->admission = std::make_unique<AdmissionController>(d.cores);
    LocalAgent* raw = agent.get();
    agents_.emplace(d.id, std::move(agent));
    registry_.transition(EntityKind::Pilot, d.id, "NEW", "QUEUED", t);
    raw->thread = std::thread(&LocalRunner::agent_main, this, raw);
    return d.id;
}

std::string LocalRunner::submit_du(const DataUnitDescription& d) {
    // Checked before any file lands so a failure below never cleans up an
    // earlier submission's replica.
    if (registry_.has_du_desc(d.id)) throw DuplicateDUId("du id already registered: " + d.id);
    DataUnitDescription dm = d;
    const bool placed = !d.initial_store.empty();
    if (placed) {
        // Sizes are measured, never trusted from the description.
        std::int64_t measured = 0;
        for (const auto& f : d.files) {
            const fs::path src = paths_.manifest_dir / f;
            if (!fs::exists(src))
                throw std::invalid_argument("du " + d.id + ": missing file " + f);
            measured += tree_bytes(src);
        }
        dm.size_bytes = measured;
    }
    const bool ingest = placed && d.initial_store != kExternalSource;
    if (ingest) {
        // Bytes land before the DU is announced READY, so a binding made the
        // moment submit_du returns finds real files in the store.
        const fs::path dst = store_dir(d.initial_store, d.id);
        fs::create_directories(dst);
        for (const auto& f : d.files) {
            const fs::path to = dst / f;
            fs::create_directories(to.parent_path());
            fs::copy(paths_.manifest_dir / f, to,
                     fs::copy_options::recursive | fs::copy_options::overwrite_existing);
        }
    }
    std::unique_lock<std::mutex> lk(mu_);
    try {
        data_.submit_du(dm, now_ms());
    } catch (...) {
        lk.unlock();
        if (ingest) fs::remove_all(store_dir(d.initial_store, d.id));
        throw;
    }
    request_epoch(); // a fresh replica may unblock waiting SUs
    return d.id;
}

std::string LocalRunner::submit_cu(const ComputeUnitDescription& d) {
    std::unique_lock<std::mutex> lk(mu_);
    for (const auto& du : d.input_data)
        if (!registry_.has_du_desc(du))
            throw UnresolvedDU("cu " + d.id + " references unknown input du " + du);
    for (const auto& du : d.output_data) {
        if (!registry_.has_du_desc(du))
            throw UnresolvedDU("cu " + d.id + " references unknown output du " + du);
        produced_by_.emplace(du, d.id);
    }
    if (registry_.has_cu_desc(d.id) || pending_cu_ids_.count(d.id))
        throw DuplicateCUId("cu id already registered: " + d.id);

    const Time t = now_ms();
    const Time at_ms = d.submit_at_s * 1000;
    if (at_ms <= t) {
        submit_cu_now(d, t);
    } else {
        pending_cu_ids_.insert(d.id);
        deferred_.push_back({d, at_ms});
    }
    return d.id;
}

void LocalRunner::submit_cu_now(const ComputeUnitDescription& d, Time t) {
    registry_.create_cu(d, t);
    curt_.emplace(d.id, CuRuntime{});
    scheduler_.form_su(d.id, t);
    request_epoch();
}

void LocalRunner::cancel(EntityKind kind, const std::string& id) {
    std::unique_lock<std::mutex> lk(mu_);
    const Time t = now_ms();
    if (kind == EntityKind::Cu) {
        const auto rec = registry_.cu_record(id);
        if (is_terminal(rec.state)) throw AlreadyTerminal("cu " + id + " is already terminal");
        if (rec.pilot.empty()) {
            registry_.transition(EntityKind::Cu, id, to_string(rec.state), "CANCELED", t,
                                 {{"reason", "cancel"}});
            return;
        }
        store_.enqueue_command({next_service_command(), rec.pilot, CommandKind::CANCEL_CU, id});
        return; // the agent's next poll picks it up
    }
    if (kind == EntityKind::Pilot) {
        const auto rec = registry_.pilot_record(id);
        if (is_terminal(rec.state)) throw AlreadyTerminal("pilot " + id + " is already terminal");
        if (rec.state == PilotState::QUEUED || rec.state == PilotState::NEW) {
            registry_.transition(EntityKind::Pilot, id, to_string(rec.state), "CANCELED", t,
                                 {{"reason", "cancel"}});
            return;
        }
        store_.enqueue_command({next_service_command(), id, CommandKind::SHUTDOWN, ""});
        return;
    }
    throw std::invalid_argument("data units cannot be canceled");
}

WaitReport LocalRunner::wait(std::optional<Time> timeout_s) {
    std::unique_lock<std::mutex> lk(mu_);
    ++waiters_;
    manager_cv_.notify_all(); // completion checks only run while someone waits
    WaitReport report;
    const auto deadline = timeout_s
                              ? std::chrono::steady_clock::now() + std::chrono::seconds(*timeout_s)
                              : std::chrono::steady_clock::time_point::max();
    while (!finalized_) {
        if (!timeout_s) {
            work_cv_.wait(lk);
        } else if (work_cv_.wait_until(lk, deadline) == std::cv_status::timeout && !finalized_) {
            report.timed_out = true;
            break;
        }
    }
    --waiters_;
    for (const auto& cu_id : registry_.cu_ids())
        report.cu_states[cu_id] = registry_.cu_record(cu_id).state;
    report.unschedulable = unschedulable_;
    report.exceeded = exceeded_;
    report.finished_at = finalized_ ? stop_t_ : now_ms();
    return report;
}

// ---------------------------------------------------------------------------
// manager thread: epochs, deferred submissions, budget, completion

void LocalRunner::manager_main() {
    std::unique_lock<std::mutex> lk(mu_);
    while (!finalized_) {
        manager_cv_.wait_for(lk, kPollInterval,
                             [&] { return finalized_ || epoch_requested_; });
        if (finalized_) break;
        const Time t = now_ms();

        for (auto it = deferred_.begin(); it != deferred_.end();) {
            if (it->at_ms <= t) {
                pending_cu_ids_.erase(it->desc.id);
                submit_cu_now(it->desc, it->at_ms);
                it = deferred_.erase(it);
            } else {
                ++it;
            }
        }
        if (opt_.t_max_s && t >= *opt_.t_max_s * 1000) {
            finalize("t_max");
            break;
        }
        if (epoch_requested_) {
            epoch_requested_ = false;
            scheduler_.run_epoch(t);
        }
        if (waiters_ > 0 && deferred_.empty() && workload_complete()) {
            finalize("complete");
            break;
        }
    }
}

void LocalRunner::request_epoch() {
    epoch_requested_ = true;
    manager_cv_.notify_all();
}

// ---------------------------------------------------------------------------
// agent thread

void LocalRunner::agent_main(LocalAgent* agent) {
    LocalAgent& a = *agent;
    {
        std::unique_lock<std::mutex> lk(mu_);
        if (finalized_ || registry_.pilot_record(a.pilot_id).state != PilotState::QUEUED)
            return; // canceled (or the run ended) before the first heartbeat
        a.run_start_ms = now_ms();
        registry_.transition(EntityKind::Pilot, a.pilot_id, "QUEUED", "RUNNING", a.run_start_ms);
        a.live = true;
        request_epoch();
    }
    while (true) {
        {
            std::unique_lock<std::mutex> lk(mu_);
            if (finalized_ || !a.live) break;
            const auto& desc = registry_.pilot_desc(a.pilot_id);
            if (now_ms() - a.run_start_ms >= desc.walltime_s * 1000) {
                shutdown_pilot(a, "walltime", "DONE", "walltime");
                break;
            }
            handle_commands(lk, a);
            if (!finalized_ && a.live) reap_exits(lk, a);
            if (!finalized_ && a.live) admit_and_start(lk, a);
            if (finalized_ || !a.live) break;
        }
        std::this_thread::sleep_for(kPollInterval);
    }
}

void LocalRunner::handle_commands(std::unique_lock<std::mutex>& lk, LocalAgent& a) {
    (void)lk;
    const auto cmds = store_.poll_commands(a.pilot_id, 64);
    const Time t = now_ms();
    for (const auto& cmd : cmds) {
        switch (cmd.kind) {
        case CommandKind::RUN_CU: {
            if (!a.admission->first_delivery(cmd.command_id)) break; // duplicate: ack only
            const auto rec = registry_.cu_record(cmd.payload);
            if (a.live && rec.state == CuState::PENDING && rec.pilot == a.pilot_id)
                a.admission->enqueue(cmd.payload, registry_.cu_desc(cmd.payload).cores,
                                     cmd.command_id);
            break;
        }
        case CommandKind::CANCEL_CU: {
            const std::string& cu_id = cmd.payload;
            if (a.admission->active(cu_id)) {
                const auto rec = registry_.cu_record(cu_id);
                if (rec.state == CuState::STAGING || rec.state == CuState::RUNNING) {
                    curt_.at(cu_id).attempt++; // invalidates any continuation
                    kill_active(a, cu_id);
                    registry_.transition(EntityKind::Cu, cu_id, to_string(rec.state),
                                         "CANCELED", t, {{"reason", "cancel"}});
                    a.admission->release(cu_id);
                    request_epoch();
                    work_cv_.notify_all();
                }
                break;
            }
            a.admission->remove_queued(cu_id);
            const auto rec = registry_.cu_record(cu_id);
            if (is_terminal(rec.state)) break;
            if (rec.pilot.empty() || rec.pilot == a.pilot_id) {
                registry_.transition(EntityKind::Cu, cu_id, to_string(rec.state), "CANCELED",
                                     t, {{"reason", "cancel"}});
                scheduler_.unbind(cu_id);
                work_cv_.notify_all();
            } else {
                // Rebound elsewhere since the cancel was issued: chase it.
                store_.enqueue_command(
                    {next_service_command(), rec.pilot, CommandKind::CANCEL_CU, cu_id});
            }
            break;
        }
        case CommandKind::SHUTDOWN:
            if (a.live) shutdown_pilot(a, "pilot canceled", "CANCELED", "cancel");
            break;
        }
        store_.acknowledge(a.pilot_id, cmd.command_id);
    }
}

void LocalRunner::reap_exits(std::unique_lock<std::mutex>& lk, LocalAgent& a) {
    std::vector<std::pair<std::string, pid_t>> look;
    look.reserve(a.actives.size());
    for (const auto& [cu_id, act] : a.actives) look.emplace_back(cu_id, act.pid);
    for (const auto& [cu_id, pid] : look) {
        int status = 0;
        const pid_t r = ::waitpid(pid, &status, WNOHANG);
        if (r != pid) continue; // still running
        a.actives.erase(cu_id);
        finish_cu(lk, a, cu_id, status);
    }
}

void LocalRunner::finish_cu(std::unique_lock<std::mutex>& lk, LocalAgent& a,
                            const std::string& cu_id, int status) {
    (void)lk;
    const Time t = now_ms();
    const int code = WIFEXITED(status) ? WEXITSTATUS(status)
                                       : 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
    if (code == 0) {
        registry_.transition(EntityKind::Cu, cu_id, "RUNNING", "DONE", t, {{"exit", 0}});
        a.admission->release(cu_id);
        collect_outputs(cu_id, a.pilot_id);
    } else {
        registry_.transition(EntityKind::Cu, cu_id, "RUNNING", "FAILED", t,
                             {{"reason", "exit"}, {"exit", code}});
        a.admission->release(cu_id);
        maybe_retry(cu_id);
    }
    request_epoch();
    work_cv_.notify_all();
}

void LocalRunner::collect_outputs(const std::string& cu_id, const std::string& pilot_id) {
    const auto& desc = registry_.cu_desc(cu_id);
    const Time t = now_ms();
    const fs::path wd = cu_dir(pilot_id, cu_id);

    for (const auto& du_id : desc.output_data) {
        if (registry_.du_record(du_id).state != DuState::NEW) continue; // already produced
        const fs::path src = wd / du_id;
        if (!fs::is_directory(src)) {
            registry_.transition(EntityKind::Du, du_id, "NEW", "FAILED", t,
                                 {{"reason", "missing"}, {"cu", cu_id}});
            continue;
        }
        const std::int64_t bytes = tree_bytes(src);
        try {
            data_.deposit(pilot_id, bytes);
        } catch (const CapacityExceeded&) {
            // The computation stays DONE; only the placement failed.
            registry_.transition(EntityKind::Du, du_id, "NEW", "FAILED", t,
                                 {{"reason", "capacity"}, {"store", pilot_id}});
            continue;
        }
        copy_du_tree(src, store_dir(pilot_id, du_id));
        registry_.du_add_replica(du_id, pilot_id, bytes, t, "output");
        registry_.transition(EntityKind::Du, du_id, "NEW", "READY", t);
    }

    // Anything else the process left behind is outside the contract.
    std::set<std::string> expected = {"stdout", "stderr"};
    for (const auto& d : desc.input_data) expected.insert(d);
    for (const auto& d : desc.output_data) expected.insert(d);
    for (const auto& entry : fs::directory_iterator(wd)) {
        const std::string name = entry.path().filename().string();
        if (!expected.count(name))
            log_.append(t, "warn", entity_key(EntityKind::Cu, cu_id), "", "",
                        {{"ignored", name}});
    }
}

void LocalRunner::admit_and_start(std::unique_lock<std::mutex>& lk, LocalAgent& a) {
    const auto admitted = a.admission->admit_ready();
    const Time t = now_ms();
    std::vector<std::pair<std::string, int>> batch;
    for (const auto& adm : admitted) {
        auto& rt = curt_.at(adm.cu_id);
        rt.attempt++;
        registry_.transition(EntityKind::Cu, adm.cu_id, "PENDING", "STAGING", t,
                             {{"command", adm.command_id}, {"slots", adm.slots}});
        batch.emplace_back(adm.cu_id, rt.attempt);
    }
    for (const auto& [cu_id, attempt] : batch) {
        if (finalized_ || !a.live) return;
        stage_and_run(lk, a, cu_id, attempt);
    }
}

void LocalRunner::stage_and_run(std::unique_lock<std::mutex>& lk, LocalAgent& a,
                                const std::string& cu_id, int attempt) {
    const auto desc = registry_.cu_desc(cu_id); // copy: the lock drops below
    const std::string pilot_id = a.pilot_id;

    std::vector<std::string> missing;
    std::int64_t need = 0;
    for (const auto& du_id : desc.input_data) {
        if (registry_.du_record(du_id).replicas.count(pilot_id)) continue;
        missing.push_back(du_id);
        need += registry_.du_record(du_id).bytes;
    }
    if (need > data_.free_bytes(pilot_id)) {
        fail_staging(a, cu_id, "staging");
        return;
    }

    for (const auto& du_id : missing) {
        if (registry_.du_record(du_id).replicas.count(pilot_id)) continue; // arrived meanwhile
        std::string src;
        std::int64_t bytes = registry_.du_record(du_id).bytes;
        try {
            src = data_.pick_source(du_id, pilot_id);
            data_.reserve(pilot_id, bytes);
        } catch (const Error&) { // SourceUnavailable or CapacityExceeded
            fail_staging(a, cu_id, "staging");
            return;
        }
        if (du_pulls_[du_id]++ == 0 && registry_.du_record(du_id).state == DuState::READY)
            registry_.transition(EntityKind::Du, du_id, "READY", "TRANSFERRING", now_ms(),
                                 {{"target", pilot_id}});
        const Time t0 = now_ms();
        const fs::path dst = store_dir(pilot_id, du_id);
        const auto du_desc = registry_.du_desc(du_id);

        lk.unlock();
        std::string copy_err;
        try {
            if (src == kExternalSource) {
                fs::create_directories(dst);
                for (const auto& f : du_desc.files) {
                    const fs::path to = dst / f;
                    fs::create_directories(to.parent_path());
                    fs::copy(paths_.manifest_dir / f, to,
                             fs::copy_options::recursive |
                                 fs::copy_options::overwrite_existing);
                }
            } else {
                copy_du_tree(store_dir(src, du_id), dst);
            }
        } catch (const std::exception& e) {
            copy_err = e.what();
        }
        lk.lock();

        if (finalized_) {
            // The run stopped mid-copy; the stop marker is already the last
            // log line, so back the reservation out silently.
            data_.release(pilot_id, bytes);
            --du_pulls_[du_id];
            return;
        }
        if (!copy_err.empty()) {
            data_.release(pilot_id, bytes);
            if (--du_pulls_[du_id] == 0 &&
                registry_.du_record(du_id).state == DuState::TRANSFERRING)
                registry_.transition(EntityKind::Du, du_id, "TRANSFERRING", "READY", now_ms());
            if (registry_.cu_record(cu_id).state == CuState::STAGING &&
                curt_.at(cu_id).attempt == attempt)
                fail_staging(a, cu_id, "staging");
            return;
        }
        data_.commit(pilot_id, bytes);
        registry_.du_merge_replica(du_id, pilot_id);
        log_.append(now_ms(), "transfer", entity_key(EntityKind::Du, du_id), "", "",
                    {{"from", src}, {"to", pilot_id}, {"bytes", bytes}, {"start", t0}});
        if (--du_pulls_[du_id] == 0 &&
            registry_.du_record(du_id).state == DuState::TRANSFERRING)
            registry_.transition(EntityKind::Du, du_id, "TRANSFERRING", "READY", now_ms());
        request_epoch(); // the new replica may unblock other SUs

        if (registry_.cu_record(cu_id).state != CuState::STAGING ||
            curt_.at(cu_id).attempt != attempt)
            return; // canceled or killed while copying; the replica stays
    }

    // Inputs all resident: lay out the workdir and start the process.
    const fs::path wd = cu_dir(pilot_id, cu_id);
    lk.unlock();
    std::string mat_err;
    try {
        fs::create_directories(wd);
        for (const auto& du_id : desc.input_data)
            copy_du_tree(store_dir(pilot_id, du_id), wd / du_id);
    } catch (const std::exception& e) {
        mat_err = e.what();
    }
    lk.lock();
    if (finalized_ || registry_.cu_record(cu_id).state != CuState::STAGING ||
        curt_.at(cu_id).attempt != attempt)
        return;
    if (!mat_err.empty()) {
        fail_staging(a, cu_id, "staging");
        return;
    }

    pid_t pid = -1;
    try {
        pid = spawn_process(desc, wd);
    } catch (const SpawnFailure&) {
        registry_.transition(EntityKind::Cu, cu_id, "STAGING", "FAILED", now_ms(),
                             {{"reason", "spawn"}});
        a.admission->release(cu_id);
        maybe_retry(cu_id);
        request_epoch();
        work_cv_.notify_all();
        return;
    }
    registry_.transition(EntityKind::Cu, cu_id, "STAGING", "RUNNING", now_ms());
    a.actives[cu_id] = {pid, attempt};
}

void LocalRunner::fail_staging(LocalAgent& a, const std::string& cu_id,
                               const std::string& reason) {
    registry_.transition(EntityKind::Cu, cu_id, "STAGING", "FAILED", now_ms(),
                         {{"reason", reason}});
    a.admission->release(cu_id);
    maybe_retry(cu_id);
    request_epoch();
    work_cv_.notify_all();
}

void LocalRunner::shutdown_pilot(LocalAgent& a, const std::string& cu_fail_reason,
                                 const std::string& pilot_to, const std::string& pilot_reason) {
    a.live = false;
    const Time t = now_ms();

    // In-flight CUs fail (and may retry elsewhere); bound-but-unstarted CUs
    // are refunded to UNSCHEDULED without consuming a retry — scheduling
    // misfortune, not task failure.
    std::vector<std::string> to_retry;
    for (const auto& cu_id : registry_.cu_ids()) {
        const auto rec = registry_.cu_record(cu_id);
        if (rec.pilot != a.pilot_id) continue;
        if (rec.state == CuState::STAGING || rec.state == CuState::RUNNING) {
            curt_.at(cu_id).attempt++;
            kill_active(a, cu_id);
            registry_.transition(EntityKind::Cu, cu_id, to_string(rec.state), "FAILED", t,
                                 {{"reason", cu_fail_reason}});
            a.admission->release(cu_id);
            to_retry.push_back(cu_id);
        } else if (rec.state == CuState::PENDING) {
            a.admission->remove_queued(cu_id);
            registry_.transition(EntityKind::Cu, cu_id, "PENDING", "UNSCHEDULED", t,
                                 {{"reason", cu_fail_reason}});
            scheduler_.unbind(cu_id);
        }
    }
    registry_.transition(EntityKind::Pilot, a.pilot_id, "RUNNING", pilot_to, t,
                         {{"reason", pilot_reason}});
    for (const auto& cu_id : to_retry) maybe_retry(cu_id);
    request_epoch();
    work_cv_.notify_all();
}

void LocalRunner::kill_active(LocalAgent& a, const std::string& cu_id) {
    auto it = a.actives.find(cu_id);
    if (it == a.actives.end()) return; // staging: no process yet
    ::kill(it->second.pid, SIGKILL);
    wait_for_pid(it->second.pid);
    a.actives.erase(it);
}

void LocalRunner::maybe_retry(const std::string& cu_id) {
    if (finalized_) return;
    const auto rec = registry_.cu_record(cu_id);
    if (rec.retry_count >= registry_.cu_desc(cu_id).max_retries) return;
    registry_.transition(EntityKind::Cu, cu_id, "FAILED", "UNSCHEDULED", now_ms());
    scheduler_.unbind(cu_id);
    request_epoch();
}

// ---------------------------------------------------------------------------
// completion / budget

std::map<std::string, bool> LocalRunner::can_run_states() const {
    int max_live_cores = 0;
    for (const auto& pid : registry_.pilot_ids()) {
        const auto st = registry_.pilot_record(pid).state;
        if (st == PilotState::QUEUED || st == PilotState::RUNNING)
            max_live_cores = std::max(max_live_cores, registry_.pilot_desc(pid).cores);
    }

    std::map<std::string, bool> can;
    const auto cu_ids = registry_.cu_ids();
    for (const auto& cu_id : cu_ids) can[cu_id] = false;

    auto du_available = [&](const std::string& du_id, const std::map<std::string, bool>& c) {
        const auto rec = registry_.du_record(du_id);
        for (const auto& holder : rec.replicas) {
            if (holder == kExternalSource) return true;
            const auto st = registry_.pilot_record(holder).state;
            if (st == PilotState::QUEUED || st == PilotState::RUNNING) return true;
        }
        auto producer = produced_by_.find(du_id);
        if (producer != produced_by_.end()) {
            auto it = c.find(producer->second);
            if (it != c.end() && it->second) return true;
        }
        return false;
    };

    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& cu_id : cu_ids) {
            if (can[cu_id]) continue;
            const auto rec = registry_.cu_record(cu_id);
            if (is_terminal(rec.state)) continue;
            bool ok;
            if (rec.state == CuState::PENDING || rec.state == CuState::STAGING ||
                rec.state == CuState::RUNNING) {
                ok = true;
            } else {
                ok = registry_.cu_desc(cu_id).cores <= max_live_cores;
                if (ok) {
                    for (const auto& du_id : registry_.cu_desc(cu_id).input_data) {
                        if (!du_available(du_id, can)) {
                            ok = false;
                            break;
                        }
                    }
                }
            }
            if (ok) {
                can[cu_id] = true;
                changed = true;
            }
        }
    }
    return can;
}

bool LocalRunner::workload_complete() const {
    bool any_idle = false;
    for (const auto& [cu_id, rt] : curt_) {
        (void)rt;
        const auto st = registry_.cu_record(cu_id).state;
        if (is_terminal(st)) continue;
        if (st == CuState::PENDING || st == CuState::STAGING || st == CuState::RUNNING)
            return false;
        any_idle = true;
    }
    if (!any_idle) return true;
    const auto can = can_run_states();
    for (const auto& [cu_id, flag] : can)
        if (flag && !is_terminal(registry_.cu_record(cu_id).state)) return false;
    return true;
}

std::vector<Unschedulable> LocalRunner::stuck_cus() const {
    int max_live_cores = 0;
    for (const auto& pid : registry_.pilot_ids()) {
        const auto st = registry_.pilot_record(pid).state;
        if (st == PilotState::QUEUED || st == PilotState::RUNNING)
            max_live_cores = std::max(max_live_cores, registry_.pilot_desc(pid).cores);
    }
    const auto can = can_run_states();
    std::vector<Unschedulable> out;
    for (const auto& cu_id : registry_.cu_ids()) {
        if (is_terminal(registry_.cu_record(cu_id).state)) continue;
        if (can.at(cu_id)) continue;
        const bool cores_stuck = registry_.cu_desc(cu_id).cores > max_live_cores;
        out.push_back({cu_id, cores_stuck ? "cores" : "data"});
    }
    return out;
}

void LocalRunner::finalize(const std::string& reason) {
    finalized_ = true;
    stop_reason_ = reason;
    stop_t_ = now_ms();
    unschedulable_ = stuck_cus();

    if (reason == "complete") {
        for (const auto& pid : registry_.pilot_ids()) {
            const auto st = registry_.pilot_record(pid).state;
            if (st == PilotState::QUEUED) {
                registry_.transition(EntityKind::Pilot, pid, "QUEUED", "CANCELED", stop_t_,
                                     {{"reason", "run complete"}});
            } else if (st == PilotState::RUNNING) {
                registry_.transition(EntityKind::Pilot, pid, "RUNNING", "DONE", stop_t_,
                                     {{"reason", "run complete"}});
                agents_.at(pid)->live = false;
            }
        }
    } else { // "t_max" or "aborted": real processes must die now
        exceeded_ = !deferred_.empty();
        for (const auto& cu_id : registry_.cu_ids())
            if (!is_terminal(registry_.cu_record(cu_id).state)) exceeded_ = true;
        for (auto& [pid, agent] : agents_) {
            if (agent->live) {
                shutdown_pilot(*agent, reason, "DONE", reason);
            } else if (registry_.pilot_record(pid).state == PilotState::QUEUED) {
                registry_.transition(EntityKind::Pilot, pid, "QUEUED", "CANCELED", stop_t_,
                                     {{"reason", reason}});
            }
        }
        if (reason == "aborted") exceeded_ = false; // not a budget stop
    }

    nlohmann::json uns = nlohmann::json::array();
    for (const auto& u : unschedulable_) uns.push_back({{"cu", u.cu_id}, {"reason", u.reason}});
    log_.append(stop_t_, "stop", "run", "", "",
                {{"reason", reason}, {"exceeded", exceeded_}, {"unschedulable", uns}});
    work_cv_.notify_all();
    manager_cv_.notify_all();
}

std::string LocalRunner::next_service_command() {
    return "svc-" + std::to_string(next_service_command_++);
}

// ---------------------------------------------------------------------------
// files & processes

std::filesystem::path LocalRunner::pilot_dir(const std::string& pilot_id) const {
    return paths_.run_root / "pilots" / pilot_id;
}

std::filesystem::path LocalRunner::store_dir(const std::string& pilot_id,
                                             const std::string& du_id) const {
    return pilot_dir(pilot_id) / "store" / du_id;
}

std::filesystem::path LocalRunner::cu_dir(const std::string& pilot_id,
                                          const std::string& cu_id) const {
    return pilot_dir(pilot_id) / "cu" / cu_id;
}

void LocalRunner::copy_du_tree(const fs::path& from, const fs::path& to) const {
    fs::create_directories(to);
    fs::copy(from, to, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
}

pid_t LocalRunner::spawn_process(const ComputeUnitDescription& cu,
                                 const fs::path& workdir) const {
    // argv is assembled before fork: the child must not allocate.
    std::vector<std::string> args;
    args.push_back(cu.executable);
    for (const auto& a : cu.args) args.push_back(a);
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    const std::string wd = workdir.string();

    int ep[2];
    if (::pipe2(ep, O_CLOEXEC) != 0)
        throw SpawnFailure("pipe: " + std::string(std::strerror(errno)));
    const pid_t pid = ::fork();
    if (pid < 0) {
        ::close(ep[0]);
        ::close(ep[1]);
        throw SpawnFailure("fork: " + std::string(std::strerror(errno)));
    }
    if (pid == 0) {
        // Child: async-signal-safe calls only, then exec.
        ::close(ep[0]);
        int fail = 0;
        if (::chdir(wd.c_str()) != 0) fail = errno;
        if (!fail) {
            const int in = ::open("/dev/null", O_RDONLY);
            const int out = ::open("stdout", O_WRONLY | O_CREAT | O_TRUNC, 0644);
            const int err = ::open("stderr", O_WRONLY | O_CREAT | O_TRUNC, 0644);
            if (in < 0 || out < 0 || err < 0 || ::dup2(in, 0) < 0 || ::dup2(out, 1) < 0 ||
                ::dup2(err, 2) < 0)
                fail = errno;
        }
        if (!fail) ::execvp(argv[0], argv.data());
        const int e = fail ? fail : errno;
        [[maybe_unused]] ssize_t n = ::write(ep[1], &e, sizeof e);
        ::_exit(127);
    }
    ::close(ep[1]);
    int e = 0;
    ssize_t n;
    while ((n = ::read(ep[0], &e, sizeof e)) < 0 && errno == EINTR) {
    }
    ::close(ep[0]);
    if (n > 0) {
        wait_for_pid(pid);
        throw SpawnFailure("exec '" + cu.executable + "': " + std::strerror(e));
    }
    return pid;
}

} // namespace pilot
