#include "pilot/coordination.hpp"

#include <algorithm>

#include "pilot/errors.hpp"

namespace pilot {

const char* to_string(CommandKind k) {
    switch (k) {
        case CommandKind::RUN_CU: return "RUN_CU";
        case CommandKind::CANCEL_CU: return "CANCEL_CU";
        case CommandKind::SHUTDOWN: return "SHUTDOWN";
    }
    return "?";
}

std::int64_t CoordinationStore::cas_put(const std::string& key,
                                        std::int64_t expected_version,
                                        std::string value) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = records_.find(key);
    if (it == records_.end()) {
        if (expected_version != 0)
            throw VersionConflict("cas_put " + key + ": key does not exist");
        records_.emplace(key, StateRecord{key, std::move(value), 1});
        return 1;
    }
    if (it->second.version != expected_version)
        throw VersionConflict("cas_put " + key + ": expected " +
                              std::to_string(expected_version) + ", have " +
                              std::to_string(it->second.version));
    it->second.value = std::move(value);
    it->second.version += 1;
    return it->second.version;
}

std::optional<StateRecord> CoordinationStore::get(const std::string& key) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = records_.find(key);
    if (it == records_.end()) return std::nullopt;
    return it->second;
}

void CoordinationStore::register_pilot(const std::string& pilot_id) {
    std::lock_guard<std::mutex> lock(mu_);
    queues_.try_emplace(pilot_id);
}

bool CoordinationStore::pilot_registered(const std::string& pilot_id) const {
    std::lock_guard<std::mutex> lock(mu_);
    return queues_.count(pilot_id) > 0;
}

void CoordinationStore::unregister_pilot(const std::string& pilot_id) {
    std::lock_guard<std::mutex> lock(mu_);
    queues_.erase(pilot_id);
}

void CoordinationStore::enqueue_command(const Command& cmd) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = queues_.find(cmd.pilot_id);
    if (it == queues_.end())
        throw UnknownPilot("enqueue_command: pilot " + cmd.pilot_id + " not registered");
    it->second.push_back(cmd);
}

std::vector<Command> CoordinationStore::poll_commands(const std::string& pilot_id,
                                                      std::size_t max_n) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = queues_.find(pilot_id);
    if (it == queues_.end())
        throw UnknownPilot("poll_commands: pilot " + pilot_id + " not registered");
    std::vector<Command> out;
    out.reserve(std::min(max_n, it->second.size()));
    for (const auto& c : it->second) {
        if (out.size() >= max_n) break;
        out.push_back(c);
    }
    return out;
}

void CoordinationStore::acknowledge(const std::string& pilot_id,
                                    const std::string& command_id) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = queues_.find(pilot_id);
    if (it == queues_.end()) return; // queue already torn down
    auto& q = it->second;
    for (auto qi = q.begin(); qi != q.end(); ++qi) {
        if (qi->command_id == command_id) {
            q.erase(qi);
            return;
        }
    }
}

std::size_t CoordinationStore::queue_depth(const std::string& pilot_id) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = queues_.find(pilot_id);
    return it == queues_.end() ? 0 : it->second.size();
}

} // namespace pilot
