#include "pilot/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <vector>

#include "pilot/data_service.hpp"
#include "pilot/errors.hpp"

namespace pilot {

namespace {

constexpr Time kInfeasible = std::numeric_limits<Time>::max() / 4;

struct Instance {
    std::vector<PilotDescription> pilots;
    std::vector<ComputeUnitDescription> cus;
    std::vector<Time> durations;
    // stage_ticks[c][p]: parallel staging time of CU c's inputs on pilot p,
    // assuming none of them are resident yet; per-DU values feed the
    // residency-aware per-pilot simulation instead, see below.
    std::map<std::string, std::vector<Time>> du_ticks; // du -> per-pilot pull time
    std::map<std::string, std::set<int>> du_initial;   // du -> pilots holding it at t=0
};

Time pull_ticks(const WorkloadManifest& m, const DataUnitDescription& du, int target,
                const Instance& inst) {
    // Fastest source among initial holders (excluding the target) and the
    // external origin, mirroring the engine's source election.
    const auto& tp = inst.pilots[static_cast<std::size_t>(target)];
    std::int64_t best_rate = -1;
    for (int p : inst.du_initial.at(du.id)) {
        if (p == target) continue;
        const auto& sp = inst.pilots[static_cast<std::size_t>(p)];
        best_rate = std::max(best_rate, m.bandwidth.rate(affinity_site(sp.affinity),
                                                         affinity_site(tp.affinity)));
    }
    if (du.initial_store == kExternalSource)
        best_rate = std::max(best_rate, m.bandwidth.default_rate);
    if (best_rate < 0)
        throw std::invalid_argument("du " + du.id + " has no source reachable from pilot " +
                                    tp.id);
    return transfer_ticks(du.size_bytes, best_rate);
}

/// FIFO completion time of one admission order on one pilot. Slots are
/// claimed at admission and held through staging + execution; a DU staged
/// once is resident for every later CU in the order.
Time fifo_completion(const Instance& inst, int pilot, const std::vector<int>& order) {
    const auto& pd = inst.pilots[static_cast<std::size_t>(pilot)];
    std::vector<Time> slots(static_cast<std::size_t>(pd.cores), pd.queue_delay_s);
    std::set<std::string> resident;
    for (const auto& [du_id, holders] : inst.du_initial)
        if (holders.count(pilot)) resident.insert(du_id);

    Time prev_admit = pd.queue_delay_s;
    Time completion = pd.queue_delay_s;
    for (int ci : order) {
        const auto& cu = inst.cus[static_cast<std::size_t>(ci)];
        if (cu.cores > pd.cores) return kInfeasible;
        std::sort(slots.begin(), slots.end());
        const Time avail = slots[static_cast<std::size_t>(cu.cores - 1)];
        const Time admit = std::max({avail, prev_admit});

        Time stage = 0;
        for (const auto& du_id : cu.input_data) {
            if (resident.count(du_id)) continue;
            stage = std::max(stage, inst.du_ticks.at(du_id)[static_cast<std::size_t>(pilot)]);
        }
        const Time end = admit + stage + inst.durations[static_cast<std::size_t>(ci)];
        for (int s = 0; s < cu.cores; ++s) slots[static_cast<std::size_t>(s)] = end;
        for (const auto& du_id : cu.input_data) resident.insert(du_id);
        prev_admit = admit;
        completion = std::max(completion, end);
    }
    return completion;
}

Time best_order_completion(const Instance& inst, int pilot, std::vector<int> cus) {
    if (cus.empty()) return 0;
    std::sort(cus.begin(), cus.end());
    Time best = kInfeasible;
    do {
        best = std::min(best, fifo_completion(inst, pilot, cus));
    } while (std::next_permutation(cus.begin(), cus.end()));
    return best;
}

} // namespace

Time optimal_makespan_oracle(const WorkloadManifest& m) {
    if (m.pilots.size() > 3)
        throw InstanceTooLarge("oracle handles at most 3 pilots, got " +
                               std::to_string(m.pilots.size()));
    if (m.compute_units.size() > 6)
        throw InstanceTooLarge("oracle handles at most 6 compute units, got " +
                               std::to_string(m.compute_units.size()));
    if (m.pilots.empty() || m.compute_units.empty())
        throw std::invalid_argument("oracle needs at least one pilot and one compute unit");
    if (m.t_max_s)
        throw std::invalid_argument("oracle does not model a run budget");

    Instance inst;
    inst.pilots = m.pilots;
    std::sort(inst.pilots.begin(), inst.pilots.end(),
              [](const PilotDescription& a, const PilotDescription& b) { return a.id < b.id; });

    std::map<std::string, const DataUnitDescription*> dus;
    for (const auto& du : m.data_units) {
        if (du.initial_store.empty())
            throw std::invalid_argument("oracle does not model produced data units (du " +
                                        du.id + ")");
        dus.emplace(du.id, &du);
        std::set<int> holders;
        for (std::size_t p = 0; p < inst.pilots.size(); ++p)
            if (inst.pilots[p].id == du.initial_store) holders.insert(static_cast<int>(p));
        inst.du_initial[du.id] = std::move(holders);
    }

    for (const auto& cu : m.compute_units) {
        if (!cu.output_data.empty())
            throw std::invalid_argument("oracle does not model produced data units (cu " +
                                        cu.id + ")");
        if (cu.sim_fail) throw std::invalid_argument("oracle does not model failures");
        if (cu.submit_at_s != 0)
            throw std::invalid_argument("oracle does not model deferred submission");
        if (!cu.sim_duration_s)
            throw std::invalid_argument("cu " + cu.id + " has no sim duration");
        inst.cus.push_back(cu);
        inst.durations.push_back(static_cast<Time>(std::ceil(*cu.sim_duration_s)));
    }

    for (const auto& [du_id, du] : dus) {
        auto& ticks = inst.du_ticks[du_id];
        for (std::size_t p = 0; p < inst.pilots.size(); ++p) {
            const bool resident = inst.du_initial[du_id].count(static_cast<int>(p)) > 0;
            ticks.push_back(resident ? 0 : pull_ticks(m, *du, static_cast<int>(p), inst));
        }
    }

    const int n = static_cast<int>(inst.cus.size());
    const int np = static_cast<int>(inst.pilots.size());
    for (const auto& cu : inst.cus) {
        bool fits = false;
        for (const auto& p : inst.pilots) fits = fits || cu.cores <= p.cores;
        if (!fits)
            throw std::invalid_argument("cu " + cu.id + " exceeds every pilot's cores");
    }

    // memo[(pilot, cu-subset)] -> best FIFO completion over admission orders.
    std::map<std::pair<int, unsigned>, Time> memo;
    auto subset_best = [&](int pilot, unsigned mask) {
        const auto key = std::make_pair(pilot, mask);
        auto it = memo.find(key);
        if (it != memo.end()) return it->second;
        std::vector<int> cus_of;
        for (int c = 0; c < n; ++c)
            if (mask & (1u << c)) cus_of.push_back(c);
        const Time best = best_order_completion(inst, pilot, std::move(cus_of));
        memo.emplace(key, best);
        return best;
    };

    Time best = kInfeasible;
    std::vector<int> assign(static_cast<std::size_t>(n), 0);
    const std::int64_t total = [&] {
        std::int64_t t = 1;
        for (int i = 0; i < n; ++i) t *= np;
        return t;
    }();
    for (std::int64_t code = 0; code < total; ++code) {
        std::int64_t c = code;
        for (int i = 0; i < n; ++i) {
            assign[static_cast<std::size_t>(i)] = static_cast<int>(c % np);
            c /= np;
        }
        std::vector<unsigned> masks(static_cast<std::size_t>(np), 0);
        for (int i = 0; i < n; ++i)
            masks[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])] |=
                (1u << i);
        Time makespan = 0;
        for (int p = 0; p < np && makespan < kInfeasible; ++p)
            makespan = std::max(makespan, subset_best(p, masks[static_cast<std::size_t>(p)]));
        best = std::min(best, makespan);
    }
    return best;
}

} // namespace pilot
