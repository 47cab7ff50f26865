#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace pilot {

struct StateRecord {
    std::string key;   // "kind/id"
    std::string value; // serialized entity state
    std::int64_t version = 0;
};

enum class CommandKind { RUN_CU, CANCEL_CU, SHUTDOWN };
const char* to_string(CommandKind k);

struct Command {
    std::string command_id; // globally unique
    std::string pilot_id;
    CommandKind kind = CommandKind::RUN_CU;
    std::string payload; // CU id for RUN_CU/CANCEL_CU, empty for SHUTDOWN
};

/// The c&c substrate: CAS-guarded state records plus per-pilot FIFO command
/// queues with at-least-once delivery (poll returns without removing, a
/// separate acknowledge removes). Safe under concurrent callers; per-key
/// writes are linearizable, cross-key ordering is unspecified. In-process
/// only, but the interface is the whole contract: a networked store could be
/// dropped in without touching callers.
class CoordinationStore {
public:
    /// expected_version 0 creates the key. Returns the new version.
    /// Throws VersionConflict when expected_version is stale; the store is
    /// left unchanged in that case.
    std::int64_t cas_put(const std::string& key, std::int64_t expected_version,
                         std::string value);

    std::optional<StateRecord> get(const std::string& key) const;

    void register_pilot(const std::string& pilot_id);
    bool pilot_registered(const std::string& pilot_id) const;
    void unregister_pilot(const std::string& pilot_id);

    void enqueue_command(const Command& cmd);           // throws UnknownPilot
    std::vector<Command> poll_commands(const std::string& pilot_id,
                                       std::size_t max_n) const; // throws UnknownPilot
    void acknowledge(const std::string& pilot_id, const std::string& command_id);
    std::size_t queue_depth(const std::string& pilot_id) const;

private:
    mutable std::mutex mu_;
    std::map<std::string, StateRecord> records_;
    std::map<std::string, std::deque<Command>> queues_;
};

} // namespace pilot
