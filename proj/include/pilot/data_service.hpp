#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>

#include "pilot/manifest.hpp"
#include "pilot/registry.hpp"
#include "pilot/types.hpp"

namespace pilot {

/// Byte accounting for one pilot-attached store. Complete replicas are
/// "used"; in-flight transfers hold "reserved" until they commit, so a store
/// can never oversubscribe even with several concurrent stagings targeting
/// it. Plain data — DataService serializes access.
class StoreLedger {
public:
    explicit StoreLedger(std::int64_t capacity = 0) : capacity_(capacity) {}

    std::int64_t capacity() const { return capacity_; }
    std::int64_t used() const { return used_; }
    std::int64_t reserved() const { return reserved_; }
    std::int64_t free() const { return capacity_ - used_ - reserved_; }

    bool fits(std::int64_t bytes) const { return bytes <= free(); }
    void reserve(std::int64_t bytes);  // throws CapacityExceeded
    void commit(std::int64_t bytes);   // reserved -> used
    void release(std::int64_t bytes);  // abandon a reservation
    void deposit(std::int64_t bytes);  // immediate complete replica; throws CapacityExceeded

private:
    std::int64_t capacity_ = 0;
    std::int64_t used_ = 0;
    std::int64_t reserved_ = 0;
};

/// A completed (or planned) movement of one DU between stores; "external"
/// names the outside source. Feeds the bytes-transferred metric via the
/// "transfer" log event.
struct TransferRecord {
    std::string du_id;
    std::string from; // store (pilot id) or "external"
    std::string to;   // store (pilot id)
    std::int64_t bytes = 0;
    Time start = 0;
    Time end = 0;
};

/// Whole-second transfer duration under the sim clock: ceil(bytes/rate),
/// zero for empty payloads.
Time transfer_ticks(std::int64_t bytes, std::int64_t rate);

/// Placement and replication bookkeeping for every pilot store: ingest at
/// submit, capacity reservations during staging, and source selection for
/// replication. Thread-safe; one lock covers all ledgers (operations are
/// O(1) and runs are small).
class DataService {
public:
    DataService(Registry& registry, BandwidthMatrix bandwidth)
        : registry_(registry), bandwidth_(std::move(bandwidth)) {}

    /// Registers the DU and places it: pilot store -> ingest (capacity
    /// deposit, NEW->TRANSFERRING->READY, a "replica" event, no "transfer"
    /// event — pre-placement is not inter-store traffic); "external" ->
    /// READY immediately, pulled lazily on first staging; empty -> left NEW
    /// for its producer CU. Throws UnknownStore or CapacityExceeded (the DU
    /// is then recorded FAILED).
    void submit_du(const DataUnitDescription& d, Time t);

    std::int64_t free_bytes(const std::string& pilot_id) const;
    std::int64_t used_bytes(const std::string& pilot_id) const;
    void reserve(const std::string& pilot_id, std::int64_t bytes);
    void commit(const std::string& pilot_id, std::int64_t bytes);
    void release(const std::string& pilot_id, std::int64_t bytes);
    void deposit(const std::string& pilot_id, std::int64_t bytes);

    /// Chooses where to pull a DU from for a transfer to target: replicas on
    /// RUNNING pilots first (highest bandwidth to the target, then smallest
    /// pilot id), falling back to the external source when the DU has one.
    /// Throws SourceUnavailable when nothing usable remains.
    std::string pick_source(const std::string& du_id, const std::string& target_pilot) const;

    /// Bandwidth between a source store ("external" uses the default rate)
    /// and a target pilot, resolved site-to-site.
    std::int64_t rate(const std::string& from_store, const std::string& target_pilot) const;

    const BandwidthMatrix& bandwidth() const { return bandwidth_; }

private:
    StoreLedger& ledger_locked(const std::string& pilot_id);
    const StoreLedger* find_ledger_locked(const std::string& pilot_id) const;

    Registry& registry_;
    BandwidthMatrix bandwidth_;
    mutable std::mutex mu_;
    std::map<std::string, StoreLedger> ledgers_;
};

} // namespace pilot
