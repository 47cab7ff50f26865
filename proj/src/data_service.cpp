#include "pilot/data_service.hpp"

#include "pilot/errors.hpp"

namespace pilot {

void StoreLedger::reserve(std::int64_t bytes) {
    if (!fits(bytes))
        throw CapacityExceeded("reserve of " + std::to_string(bytes) + " bytes exceeds free " +
                               std::to_string(free()));
    reserved_ += bytes;
}

void StoreLedger::commit(std::int64_t bytes) {
    reserved_ -= bytes;
    used_ += bytes;
}

void StoreLedger::release(std::int64_t bytes) { reserved_ -= bytes; }

void StoreLedger::deposit(std::int64_t bytes) {
    if (!fits(bytes))
        throw CapacityExceeded("deposit of " + std::to_string(bytes) + " bytes exceeds free " +
                               std::to_string(free()));
    used_ += bytes;
}

Time transfer_ticks(std::int64_t bytes, std::int64_t rate) {
    if (bytes <= 0) return 0;
    return (bytes + rate - 1) / rate;
}

void DataService::submit_du(const DataUnitDescription& d, Time t) {
    if (!d.initial_store.empty() && d.initial_store != kExternalSource &&
        !registry_.has_pilot_desc(d.initial_store))
        throw UnknownStore("initial_store names no pilot: " + d.initial_store);

    registry_.create_du(d, t);
    if (d.initial_store.empty()) return; // produced later by its CU

    if (d.initial_store == kExternalSource) {
        registry_.du_add_replica(d.id, kExternalSource, d.size_bytes, t, "external");
        registry_.transition(EntityKind::Du, d.id, "NEW", "READY", t);
        return;
    }

    registry_.transition(EntityKind::Du, d.id, "NEW", "TRANSFERRING", t,
                         {{"store", d.initial_store}});
    try {
        deposit(d.initial_store, d.size_bytes);
    } catch (const CapacityExceeded&) {
        registry_.transition(EntityKind::Du, d.id, "TRANSFERRING", "FAILED", t,
                             {{"reason", "capacity"}});
        throw;
    }
    registry_.du_add_replica(d.id, d.initial_store, d.size_bytes, t, "ingest");
    registry_.transition(EntityKind::Du, d.id, "TRANSFERRING", "READY", t);
}

std::int64_t DataService::free_bytes(const std::string& pilot_id) const {
    std::lock_guard<std::mutex> lock(mu_);
    const auto* l = find_ledger_locked(pilot_id);
    return l ? l->free() : registry_.pilot_desc(pilot_id).store_capacity_bytes;
}

std::int64_t DataService::used_bytes(const std::string& pilot_id) const {
    std::lock_guard<std::mutex> lock(mu_);
    const auto* l = find_ledger_locked(pilot_id);
    return l ? l->used() : 0;
}

void DataService::reserve(const std::string& pilot_id, std::int64_t bytes) {
    std::lock_guard<std::mutex> lock(mu_);
    ledger_locked(pilot_id).reserve(bytes);
}

void DataService::commit(const std::string& pilot_id, std::int64_t bytes) {
    std::lock_guard<std::mutex> lock(mu_);
    ledger_locked(pilot_id).commit(bytes);
}

void DataService::release(const std::string& pilot_id, std::int64_t bytes) {
    std::lock_guard<std::mutex> lock(mu_);
    ledger_locked(pilot_id).release(bytes);
}

void DataService::deposit(const std::string& pilot_id, std::int64_t bytes) {
    std::lock_guard<std::mutex> lock(mu_);
    ledger_locked(pilot_id).deposit(bytes);
}

std::string DataService::pick_source(const std::string& du_id,
                                     const std::string& target_pilot) const {
    const auto du = registry_.du_record(du_id);
    std::string best;
    std::int64_t best_rate = -1;
    bool external = false;
    for (const auto& holder : du.replicas) {
        if (holder == kExternalSource) {
            external = true;
            continue;
        }
        if (holder == target_pilot) continue;
        if (registry_.pilot_record(holder).state != PilotState::RUNNING) continue;
        const std::int64_t r = rate(holder, target_pilot);
        if (r > best_rate) { // ties resolved by set order: smallest id wins
            best_rate = r;
            best = holder;
        }
    }
    if (!best.empty()) return best;
    if (external) return kExternalSource;
    throw SourceUnavailable("no live replica or external source for du " + du_id);
}

std::int64_t DataService::rate(const std::string& from_store,
                               const std::string& target_pilot) const {
    if (from_store == kExternalSource) return bandwidth_.default_rate;
    const auto from_site = affinity_site(registry_.pilot_desc(from_store).affinity);
    const auto to_site = affinity_site(registry_.pilot_desc(target_pilot).affinity);
    return bandwidth_.rate(from_site, to_site);
}

StoreLedger& DataService::ledger_locked(const std::string& pilot_id) {
    auto it = ledgers_.find(pilot_id);
    if (it == ledgers_.end()) {
        const auto& desc = registry_.pilot_desc(pilot_id); // UnknownEntity for strangers
        it = ledgers_.emplace(pilot_id, StoreLedger(desc.store_capacity_bytes)).first;
    }
    return it->second;
}

const StoreLedger* DataService::find_ledger_locked(const std::string& pilot_id) const {
    auto it = ledgers_.find(pilot_id);
    return it == ledgers_.end() ? nullptr : &it->second;
}

} // namespace pilot
