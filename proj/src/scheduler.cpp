#include "pilot/scheduler.hpp"

#include <algorithm>

#include "pilot/errors.hpp"

namespace pilot {

const char* to_string(BindPolicy p) {
    return p == BindPolicy::Affinity ? "affinity" : "round-robin";
}

std::optional<BindPolicy> bind_policy_from(std::string_view s) {
    if (s == "affinity") return BindPolicy::Affinity;
    if (s == "round-robin") return BindPolicy::RoundRobin;
    return std::nullopt;
}

void Scheduler::form_su(const std::string& cu_id, Time t) {
    const auto& desc = registry_.cu_desc(cu_id); // throws UnknownEntity for strangers
    {
        std::lock_guard<std::mutex> lock(mu_);
        if (sus_.count(cu_id)) throw DuplicateSU("su already formed for cu " + cu_id);
        SchedulableUnit su;
        su.cu_id = cu_id;
        su.du_ids = desc.input_data;
        sus_.emplace(cu_id, std::move(su));
        order_.push_back(cu_id);
    }
    registry_.transition(EntityKind::Cu, cu_id, "NEW", "UNSCHEDULED", t);
}

PlacementScore Scheduler::score(const SchedulableUnit& su, const std::string& pilot_id,
                                int queued_load) const {
    PlacementScore s;
    s.pilot_id = pilot_id;
    s.queued_load = queued_load;
    const auto& pilot_affinity = registry_.pilot_desc(pilot_id).affinity;
    for (const auto& du_id : su.du_ids) {
        const auto rec = registry_.du_record(du_id);
        if (rec.replicas.count(pilot_id)) {
            s.local_bytes += rec.bytes;
        } else {
            s.affinity_sum += affinity_distance(pilot_affinity, registry_.du_desc(du_id).affinity);
        }
    }
    return s;
}

std::vector<Binding> Scheduler::run_epoch(Time t) {
    struct Candidate {
        std::string id;
        int free_cores = 0;
        int queued_load = 0;
    };

    // RUNNING pilots with their current commitments. Free cores count every
    // bound-and-unfinished CU (PENDING in the agent's admission queue as much
    // as STAGING/RUNNING in a slot), so an epoch never over-commits a pilot.
    std::vector<Candidate> pilots;
    for (const auto& pid : registry_.pilot_ids()) {
        if (registry_.pilot_record(pid).state != PilotState::RUNNING) continue;
        pilots.push_back({pid, registry_.pilot_desc(pid).cores, 0});
    }
    std::sort(pilots.begin(), pilots.end(),
              [](const Candidate& a, const Candidate& b) { return a.id < b.id; });
    std::vector<std::string> cu_order = registry_.cu_ids();
    for (const auto& cu_id : cu_order) {
        const auto rec = registry_.cu_record(cu_id);
        if (rec.pilot.empty()) continue;
        if (rec.state != CuState::PENDING && rec.state != CuState::STAGING &&
            rec.state != CuState::RUNNING)
            continue;
        for (auto& p : pilots) {
            if (p.id == rec.pilot) {
                p.free_cores -= registry_.cu_desc(cu_id).cores;
                p.queued_load += 1;
            }
        }
    }

    std::vector<Binding> out;
    int epoch_no;
    {
        std::lock_guard<std::mutex> lock(mu_);
        epoch_no = ++epoch_;
    }

    for (const auto& cu_id : cu_order) {
        SchedulableUnit su_copy;
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto it = sus_.find(cu_id);
            if (it == sus_.end() || !it->second.bound_pilot.empty()) continue;
            su_copy = it->second;
        }
        if (registry_.cu_record(cu_id).state != CuState::UNSCHEDULED) continue;
        const auto& desc = registry_.cu_desc(cu_id);

        // Every input DU needs a usable source before the CU can bind: a
        // replica on a RUNNING pilot or the external origin. DUs awaiting
        // their producer keep the CU unbound (late binding on data).
        bool data_ready = true;
        for (const auto& du_id : su_copy.du_ids) {
            if (!du_usable(du_id)) {
                data_ready = false;
                break;
            }
        }
        if (!data_ready) continue;

        std::vector<const Candidate*> eligible;
        for (const auto& p : pilots)
            if (p.free_cores >= desc.cores) eligible.push_back(&p);
        if (eligible.empty()) continue; // stays unbound; a later epoch retries

        const Candidate* chosen = nullptr;
        if (policy_ == BindPolicy::RoundRobin) {
            std::size_t cursor;
            {
                std::lock_guard<std::mutex> lock(mu_);
                cursor = rr_cursor_++;
            }
            chosen = eligible[cursor % eligible.size()];
        } else {
            auto better = [](const PlacementScore& a, const PlacementScore& b) {
                if (a.local_bytes != b.local_bytes) return a.local_bytes > b.local_bytes;
                if (a.affinity_sum != b.affinity_sum) return a.affinity_sum > b.affinity_sum;
                if (a.queued_load != b.queued_load) return a.queued_load < b.queued_load;
                return a.pilot_id < b.pilot_id;
            };
            PlacementScore best;
            for (const auto* p : eligible) {
                PlacementScore s = score(su_copy, p->id, p->queued_load);
                if (!chosen || better(s, best)) {
                    best = std::move(s);
                    chosen = p;
                }
            }
        }

        Binding b;
        b.cu_id = cu_id;
        b.pilot_id = chosen->id;
        b.command_id = next_command_id();
        b.epoch = epoch_no;

        registry_.transition(EntityKind::Cu, cu_id, "UNSCHEDULED", "PENDING", t,
                             {{"pilot", b.pilot_id}, {"epoch", epoch_no}});
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto& su = sus_.at(cu_id);
            su.bound_pilot = b.pilot_id;
            su.bind_time = t;
        }
        Command cmd{b.command_id, b.pilot_id, CommandKind::RUN_CU, cu_id};
        store_.enqueue_command(cmd);
        if (duplicate_commands_) store_.enqueue_command(cmd);

        for (auto& p : pilots) {
            if (p.id == chosen->id) {
                p.free_cores -= desc.cores;
                p.queued_load += 1;
            }
        }
        out.push_back(std::move(b));
    }
    return out;
}

void Scheduler::unbind(const std::string& cu_id) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = sus_.find(cu_id);
    if (it == sus_.end()) throw UnknownEntity("no su for cu " + cu_id);
    it->second.bound_pilot.clear();
    it->second.bind_time.reset();
}

SchedulableUnit Scheduler::su(const std::string& cu_id) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = sus_.find(cu_id);
    if (it == sus_.end()) throw UnknownEntity("no su for cu " + cu_id);
    return it->second;
}

std::vector<std::string> Scheduler::unbound_cus() const {
    std::lock_guard<std::mutex> lock(mu_);
    std::vector<std::string> out;
    for (const auto& cu_id : order_)
        if (sus_.at(cu_id).bound_pilot.empty()) out.push_back(cu_id);
    return out;
}

int Scheduler::epoch() const {
    std::lock_guard<std::mutex> lock(mu_);
    return epoch_;
}

bool Scheduler::du_usable(const std::string& du_id) const {
    const auto rec = registry_.du_record(du_id);
    for (const auto& holder : rec.replicas) {
        if (holder == kExternalSource) return true;
        if (registry_.pilot_record(holder).state == PilotState::RUNNING) return true;
    }
    return false;
}

std::string Scheduler::next_command_id() {
    std::lock_guard<std::mutex> lock(mu_);
    return "cmd-" + std::to_string(next_command_++);
}

} // namespace pilot
