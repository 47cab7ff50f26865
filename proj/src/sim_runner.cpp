#include "pilot/sim_runner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pilot/errors.hpp"

namespace pilot {

SimRunner::SimRunner(RunOptions opt) : SimRunner(std::move(opt), BandwidthMatrix{}) {}

SimRunner::SimRunner(RunOptions opt, BandwidthMatrix bandwidth)
    : opt_(std::move(opt)),
      registry_(store_, log_),
      data_(registry_, std::move(bandwidth)),
      scheduler_(registry_, store_, opt_.policy) {
    scheduler_.set_duplicate_commands(opt_.duplicate_commands);
    if (opt_.t_max_s) {
        // Scheduled before anything else so the budget preempts same-tick
        // events: nothing happens at or after t_max.
        engine_.schedule(*opt_.t_max_s, [this] {
            if (finalized_) return;
            finalize("t_max");
        });
    }
}

SimRunner::SimRunner(const WorkloadManifest& m, RunOptions opt)
    : SimRunner(
          [&] {
              if (!opt.seed && m.seed) opt.seed = m.seed;
              if (!opt.t_max_s && m.t_max_s) opt.t_max_s = m.t_max_s;
              return opt;
          }(),
          m.bandwidth) {
    for (const auto& p : m.pilots) create_pilot(p);
    for (const auto& d : m.data_units) submit_du(d);
    for (const auto& c : m.compute_units) submit_cu(c);
}

LogHeader SimRunner::header() const {
    LogHeader h;
    h.backend = "sim";
    h.time_unit = "ticks";
    h.seed = opt_.seed;
    h.t_max_s = opt_.t_max_s;
    h.policy = to_string(opt_.policy);
    return h;
}

std::string SimRunner::create_pilot(const PilotDescription& d) {
    if (resource_backend(d.resource) != BackendKind::Sim)
        throw BackendUnavailable("sim runner cannot start resource '" + d.resource + "'");
    const Time t = engine_.now();
    registry_.create_pilot(d, t); // throws DuplicatePilotId
    store_.register_pilot(d.id);
    agents_[d.id].admission = std::make_unique<AdmissionController>(d.cores);
    registry_.transition(EntityKind::Pilot, d.id, "NEW", "QUEUED", t);
    engine_.schedule(t + d.queue_delay_s, [this, id = d.id] { on_pilot_running(id); });
    return d.id;
}

std::string SimRunner::submit_du(const DataUnitDescription& d) {
    data_.submit_du(d, engine_.now());
    request_epoch(); // a fresh replica may unblock waiting SUs
    return d.id;
}

std::string SimRunner::submit_cu(const ComputeUnitDescription& d) {
    if (!d.sim_duration_s)
        throw MissingDuration("cu " + d.id + " has no sim_duration_s");
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

    const Time t = engine_.now();
    auto submit_now = [this, d](Time at) {
        registry_.create_cu(d, at);
        curt_.emplace(d.id, CuRuntime{});
        scheduler_.form_su(d.id, at);
        request_epoch();
    };
    if (d.submit_at_s <= t) {
        submit_now(t);
    } else {
        ++pending_submissions_;
        pending_cu_ids_.insert(d.id);
        engine_.schedule(d.submit_at_s, [this, submit_now, id = d.id, at = d.submit_at_s] {
            --pending_submissions_;
            pending_cu_ids_.erase(id);
            if (stopping_) return;
            submit_now(at);
        });
    }
    return d.id;
}

void SimRunner::cancel(EntityKind kind, const std::string& id) {
    const Time t = engine_.now();
    if (kind == EntityKind::Cu) {
        const auto rec = registry_.cu_record(id);
        if (is_terminal(rec.state)) throw AlreadyTerminal("cu " + id + " is already terminal");
        if (rec.pilot.empty()) {
            registry_.transition(EntityKind::Cu, id, to_string(rec.state), "CANCELED", t,
                                 {{"reason", "cancel"}});
            return;
        }
        store_.enqueue_command({next_service_command(), rec.pilot, CommandKind::CANCEL_CU, id});
        poke_agent(rec.pilot);
        return;
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
        poke_agent(id);
        return;
    }
    throw std::invalid_argument("data units cannot be canceled");
}

void SimRunner::schedule_cancel(Time t, EntityKind kind, const std::string& id) {
    engine_.schedule(t, [this, kind, id] {
        if (finalized_) return;
        try {
            cancel(kind, id);
        } catch (const AlreadyTerminal&) {
        }
    });
}

WaitReport SimRunner::wait(std::optional<Time> timeout_s) {
    const Time deadline =
        timeout_s ? engine_.now() + *timeout_s : std::numeric_limits<Time>::max();
    WaitReport report;
    if (!finalized_ && pending_submissions_ == 0 && workload_complete())
        finalize("complete"); // trivially/provably done before the first tick
    while (!finalized_) {
        if (engine_.empty()) {
            // Quiesced without completing: whatever is left can never make
            // progress (this also catches producer/consumer cycles).
            finalize("complete");
            break;
        }
        if (engine_.next_time() > deadline) {
            report.timed_out = true;
            break;
        }
        engine_.tick();
        if (!finalized_ && pending_submissions_ == 0 && workload_complete()) finalize("complete");
    }
    for (const auto& cu_id : registry_.cu_ids())
        report.cu_states[cu_id] = registry_.cu_record(cu_id).state;
    report.unschedulable = unschedulable_;
    report.exceeded = exceeded_;
    report.finished_at = engine_.now();
    return report;
}

// ---------------------------------------------------------------------------

void SimRunner::request_epoch() {
    if (epoch_pending_ || stopping_) return;
    epoch_pending_ = true;
    engine_.schedule(engine_.now(), [this] {
        epoch_pending_ = false;
        if (stopping_) return;
        for (const auto& b : scheduler_.run_epoch(engine_.now())) poke_agent(b.pilot_id);
    });
}

void SimRunner::poke_agent(const std::string& pilot_id) {
    if (!poll_pending_.insert(pilot_id).second) return;
    engine_.schedule(engine_.now(), [this, pilot_id] {
        poll_pending_.erase(pilot_id);
        on_agent_poll(pilot_id);
    });
}

void SimRunner::on_pilot_running(const std::string& pilot_id) {
    if (stopping_) return;
    if (registry_.pilot_record(pilot_id).state != PilotState::QUEUED) return; // canceled
    const Time t = engine_.now();
    registry_.transition(EntityKind::Pilot, pilot_id, "QUEUED", "RUNNING", t);
    auto& agent = agents_.at(pilot_id);
    agent.live = true;
    agent.run_start = t;
    engine_.schedule(t + registry_.pilot_desc(pilot_id).walltime_s,
                     [this, pilot_id] { on_walltime(pilot_id); });
    request_epoch();
}

void SimRunner::on_agent_poll(const std::string& pilot_id) {
    if (stopping_) return;
    auto& agent = agents_.at(pilot_id);
    const Time t = engine_.now();
    for (const auto& cmd : store_.poll_commands(pilot_id, 64)) {
        const bool fresh = agent.admission->first_delivery(cmd.command_id);
        if (fresh) {
            switch (cmd.kind) {
                case CommandKind::RUN_CU: {
                    const auto rec = registry_.cu_record(cmd.payload);
                    // Stale delivery (refunded or re-bound elsewhere) is acked
                    // and dropped; the scheduler owns any re-dispatch.
                    if (agent.live && rec.state == CuState::PENDING && rec.pilot == pilot_id)
                        agent.admission->enqueue(cmd.payload,
                                                 registry_.cu_desc(cmd.payload).cores,
                                                 cmd.command_id);
                    break;
                }
                case CommandKind::CANCEL_CU: {
                    const auto& cu_id = cmd.payload;
                    if (agent.admission->active(cu_id)) {
                        cancel_active_cu(cu_id, pilot_id);
                        break;
                    }
                    agent.admission->remove_queued(cu_id);
                    const auto rec = registry_.cu_record(cu_id);
                    if (is_terminal(rec.state)) break;
                    if (rec.pilot.empty() || rec.pilot == pilot_id) {
                        // Covers admission-queued, delivered-but-unadmitted, and
                        // already-refunded cases alike: nothing has started.
                        registry_.transition(EntityKind::Cu, cu_id, to_string(rec.state),
                                             "CANCELED", t, {{"reason", "cancel"}});
                        scheduler_.unbind(cu_id);
                    } else {
                        // The CU moved (refund + rebind) before this command
                        // landed; chase it to its current pilot.
                        store_.enqueue_command({next_service_command(), rec.pilot,
                                                CommandKind::CANCEL_CU, cu_id});
                        poke_agent(rec.pilot);
                    }
                    break;
                }
                case CommandKind::SHUTDOWN:
                    if (registry_.pilot_record(pilot_id).state == PilotState::RUNNING)
                        shutdown_pilot(pilot_id, "pilot canceled", "CANCELED", "cancel");
                    break;
            }
        }
        store_.acknowledge(pilot_id, cmd.command_id);
    }
    if (store_.queue_depth(pilot_id) > 0) poke_agent(pilot_id); // more than one batch
    try_admissions(pilot_id);
}

void SimRunner::try_admissions(const std::string& pilot_id) {
    auto& agent = agents_.at(pilot_id);
    if (!agent.live) return;
    const Time t = engine_.now();
    for (const auto& adm : agent.admission->admit_ready()) {
        curt_.at(adm.cu_id).attempt++;
        registry_.transition(EntityKind::Cu, adm.cu_id, "PENDING", "STAGING", t,
                             {{"command", adm.command_id}, {"slots", adm.slots}});
        begin_staging(adm.cu_id, pilot_id);
    }
}

void SimRunner::begin_staging(const std::string& cu_id, const std::string& pilot_id) {
    const auto& desc = registry_.cu_desc(cu_id);
    const Time t = engine_.now();

    std::vector<std::string> missing;
    for (const auto& du_id : desc.input_data)
        if (!registry_.du_record(du_id).replicas.count(pilot_id)) missing.push_back(du_id);
    if (missing.empty()) {
        to_running(cu_id, pilot_id);
        return;
    }

    std::vector<std::string> fresh; // not already in flight toward this store
    std::int64_t fresh_bytes = 0;
    for (const auto& du_id : missing) {
        if (!inflight_.count({du_id, pilot_id})) {
            fresh.push_back(du_id);
            fresh_bytes += registry_.du_record(du_id).bytes;
        }
    }
    if (fresh_bytes > data_.free_bytes(pilot_id)) {
        fail_staging(cu_id, pilot_id);
        return;
    }

    auto& rt = curt_.at(cu_id);
    rt.waiting = static_cast<int>(missing.size());
    for (const auto& du_id : missing) {
        auto it = inflight_.find({du_id, pilot_id});
        if (it != inflight_.end()) {
            it->second.waiters.emplace_back(cu_id, rt.attempt);
            continue;
        }
        std::string from;
        try {
            from = data_.pick_source(du_id, pilot_id);
        } catch (const SourceUnavailable&) {
            // Reservations made for earlier DUs of this pass stay with their
            // transfers only; none exist yet for this DU. Give up wholesale.
            fail_staging(cu_id, pilot_id);
            return;
        }
        const std::int64_t bytes = registry_.du_record(du_id).bytes;
        data_.reserve(pilot_id, bytes);
        const Time end = t + transfer_ticks(bytes, data_.rate(from, pilot_id));
        InFlight tr{du_id, pilot_id, from, bytes, t, end, {{cu_id, rt.attempt}}};
        inflight_.emplace(std::make_pair(du_id, pilot_id), std::move(tr));
        if (++du_inflight_[du_id] == 1)
            registry_.transition(EntityKind::Du, du_id, "READY", "TRANSFERRING", t,
                                 {{"target", pilot_id}});
        engine_.schedule(end, [this, du_id, pilot_id] { on_transfer_end(du_id, pilot_id); });
    }
}

void SimRunner::fail_staging(const std::string& cu_id, const std::string& pilot_id) {
    const Time t = engine_.now();
    registry_.transition(EntityKind::Cu, cu_id, "STAGING", "FAILED", t,
                         {{"reason", "staging"}});
    release_slots(cu_id, pilot_id);
    maybe_retry(cu_id);
    try_admissions(pilot_id);
    request_epoch();
}

void SimRunner::on_transfer_end(const std::string& du_id, const std::string& pilot_id) {
    auto it = inflight_.find({du_id, pilot_id});
    if (it == inflight_.end() || stopping_) return; // canceled with its target pilot
    const InFlight tr = std::move(it->second);
    inflight_.erase(it);
    const Time t = engine_.now();

    data_.commit(pilot_id, tr.bytes);
    registry_.du_merge_replica(du_id, pilot_id);
    log_.append(t, "transfer", entity_key(EntityKind::Du, du_id), "", "",
                {{"from", tr.from}, {"to", tr.target}, {"bytes", tr.bytes}, {"start", tr.start}});
    if (--du_inflight_[du_id] == 0)
        registry_.transition(EntityKind::Du, du_id, "TRANSFERRING", "READY", t);

    for (const auto& [cu_id, attempt] : tr.waiters) {
        auto& rt = curt_.at(cu_id);
        if (rt.attempt != attempt) continue; // canceled or restarted since
        if (registry_.cu_record(cu_id).state != CuState::STAGING) continue;
        if (--rt.waiting == 0) to_running(cu_id, pilot_id);
    }
    request_epoch();
}

void SimRunner::to_running(const std::string& cu_id, const std::string& pilot_id) {
    const Time t = engine_.now();
    registry_.transition(EntityKind::Cu, cu_id, "STAGING", "RUNNING", t);
    const auto& desc = registry_.cu_desc(cu_id);
    const Time dur = static_cast<Time>(std::ceil(*desc.sim_duration_s));
    const int attempt = curt_.at(cu_id).attempt;
    engine_.schedule(t + dur, [this, cu_id, attempt, pilot_id] {
        on_cu_complete(cu_id, attempt, pilot_id);
    });
}

void SimRunner::on_cu_complete(const std::string& cu_id, int attempt,
                               const std::string& pilot_id) {
    if (stopping_) return;
    if (curt_.at(cu_id).attempt != attempt) return; // superseded
    if (registry_.cu_record(cu_id).state != CuState::RUNNING) return;
    const Time t = engine_.now();
    const auto& desc = registry_.cu_desc(cu_id);
    if (desc.sim_fail) {
        registry_.transition(EntityKind::Cu, cu_id, "RUNNING", "FAILED", t,
                             {{"reason", "exit"}});
        release_slots(cu_id, pilot_id);
        maybe_retry(cu_id);
    } else {
        registry_.transition(EntityKind::Cu, cu_id, "RUNNING", "DONE", t);
        release_slots(cu_id, pilot_id);
        register_outputs(cu_id, pilot_id);
    }
    try_admissions(pilot_id);
    request_epoch();
}

void SimRunner::register_outputs(const std::string& cu_id, const std::string& pilot_id) {
    const Time t = engine_.now();
    for (const auto& du_id : registry_.cu_desc(cu_id).output_data) {
        if (registry_.du_record(du_id).state != DuState::NEW) continue; // already produced
        const std::int64_t bytes = registry_.du_desc(du_id).size_bytes;
        try {
            data_.deposit(pilot_id, bytes);
        } catch (const CapacityExceeded&) {
            // The computation stays DONE; only the placement failed.
            registry_.transition(EntityKind::Du, du_id, "NEW", "FAILED", t,
                                 {{"reason", "capacity"}, {"store", pilot_id}});
            continue;
        }
        registry_.du_add_replica(du_id, pilot_id, bytes, t, "output");
        registry_.transition(EntityKind::Du, du_id, "NEW", "READY", t);
    }
}

void SimRunner::on_walltime(const std::string& pilot_id) {
    if (stopping_) return;
    if (!agents_.at(pilot_id).live) return;
    shutdown_pilot(pilot_id, "walltime", "DONE", "walltime");
}

void SimRunner::shutdown_pilot(const std::string& pilot_id, const std::string& cu_fail_reason,
                               const std::string& pilot_to, const std::string& pilot_reason) {
    auto& agent = agents_.at(pilot_id);
    agent.live = false;
    const Time t = engine_.now();

    // In-flight CUs fail (and may retry elsewhere); bound-but-unstarted CUs
    // are refunded to UNSCHEDULED without consuming a retry — scheduling
    // misfortune, not task failure. The refund scan covers commands still in
    // the queue, not just CUs the agent had admitted.
    std::vector<std::string> to_retry;
    for (const auto& cu_id : registry_.cu_ids()) {
        const auto rec = registry_.cu_record(cu_id);
        if (rec.pilot != pilot_id) continue;
        if (rec.state == CuState::STAGING || rec.state == CuState::RUNNING) {
            curt_.at(cu_id).attempt++;
            registry_.transition(EntityKind::Cu, cu_id, to_string(rec.state), "FAILED", t,
                                 {{"reason", cu_fail_reason}});
            agent.admission->release(cu_id);
            to_retry.push_back(cu_id);
        } else if (rec.state == CuState::PENDING) {
            agent.admission->remove_queued(cu_id);
            registry_.transition(EntityKind::Cu, cu_id, "PENDING", "UNSCHEDULED", t,
                                 {{"reason", cu_fail_reason}});
            scheduler_.unbind(cu_id);
        }
    }
    cancel_transfers_into(pilot_id);
    registry_.transition(EntityKind::Pilot, pilot_id, "RUNNING", pilot_to, t,
                         {{"reason", pilot_reason}});
    for (const auto& cu_id : to_retry) maybe_retry(cu_id);
    request_epoch();
}

void SimRunner::cancel_transfers_into(const std::string& pilot_id) {
    const Time t = engine_.now();
    for (auto it = inflight_.begin(); it != inflight_.end();) {
        if (it->second.target != pilot_id) {
            ++it;
            continue;
        }
        data_.release(pilot_id, it->second.bytes);
        const std::string du_id = it->second.du_id;
        it = inflight_.erase(it);
        if (--du_inflight_[du_id] == 0)
            registry_.transition(EntityKind::Du, du_id, "TRANSFERRING", "READY", t);
    }
}

void SimRunner::cancel_active_cu(const std::string& cu_id, const std::string& pilot_id) {
    const auto rec = registry_.cu_record(cu_id);
    if (rec.state != CuState::STAGING && rec.state != CuState::RUNNING) return;
    curt_.at(cu_id).attempt++; // invalidates completion and transfer waits
    registry_.transition(EntityKind::Cu, cu_id, to_string(rec.state), "CANCELED", engine_.now(),
                         {{"reason", "cancel"}});
    release_slots(cu_id, pilot_id);
    try_admissions(pilot_id);
    request_epoch();
}

void SimRunner::maybe_retry(const std::string& cu_id) {
    if (stopping_) return;
    const auto rec = registry_.cu_record(cu_id);
    if (rec.retry_count >= registry_.cu_desc(cu_id).max_retries) return;
    registry_.transition(EntityKind::Cu, cu_id, "FAILED", "UNSCHEDULED", engine_.now());
    scheduler_.unbind(cu_id);
    request_epoch();
}

void SimRunner::release_slots(const std::string& cu_id, const std::string& pilot_id) {
    agents_.at(pilot_id).admission->release(cu_id);
}

// ---------------------------------------------------------------------------

std::map<std::string, bool> SimRunner::can_run_states() const {
    // Least fixpoint of "could still make progress": a CU in flight counts;
    // an unbound CU needs a live pilot big enough and, for every input,
    // either a usable source now or a producer that could itself still run.
    // Producer/consumer cycles therefore resolve to "stuck".
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

bool SimRunner::workload_complete() const {
    // Cheap scan first: anything in flight can still make progress, and that
    // is the common mid-run case. The fixpoint only runs once every
    // remaining CU is idle (UNSCHEDULED / NEW), i.e. near the end.
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

std::vector<Unschedulable> SimRunner::stuck_cus() const {
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

void SimRunner::finalize(const std::string& reason) {
    stopping_ = true;
    finalized_ = true;
    const Time t = engine_.now();

    unschedulable_ = stuck_cus();
    if (reason == "t_max") {
        // No forced transitions: the log keeps the truthful partial
        // timelines. The stop marker alone ends the run.
        exceeded_ = pending_submissions_ > 0;
        for (const auto& cu_id : registry_.cu_ids())
            if (!is_terminal(registry_.cu_record(cu_id).state)) exceeded_ = true;
    } else {
        for (const auto& pid : registry_.pilot_ids()) {
            const auto st = registry_.pilot_record(pid).state;
            if (st == PilotState::QUEUED) {
                registry_.transition(EntityKind::Pilot, pid, "QUEUED", "CANCELED", t,
                                     {{"reason", "run complete"}});
            } else if (st == PilotState::RUNNING) {
                registry_.transition(EntityKind::Pilot, pid, "RUNNING", "DONE", t,
                                     {{"reason", "run complete"}});
                agents_.at(pid).live = false;
            }
        }
    }

    nlohmann::json uns = nlohmann::json::array();
    for (const auto& u : unschedulable_) uns.push_back({{"cu", u.cu_id}, {"reason", u.reason}});
    log_.append(t, "stop", "run", "", "",
                {{"reason", reason}, {"exceeded", exceeded_}, {"unschedulable", uns}});
}

std::string SimRunner::next_service_command() {
    return "svc-" + std::to_string(next_service_command_++);
}

} // namespace pilot
