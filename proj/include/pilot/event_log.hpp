#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pilot/types.hpp"

namespace pilot {

/// One line of the run log. kind is "state" (lifecycle transition, with
/// from/to; from empty means entity creation), "replica" (a complete copy
/// appeared in a store without an inter-store transfer: ingest or output
/// registration), "transfer" (bytes moved between stores, logged at end
/// time), or "stop" (run end marker, entity "run").
struct Event {
    std::int64_t seq = 0;
    Time t = 0;
    std::string kind;
    std::string entity;
    std::string from;
    std::string to;
    nlohmann::json data = nlohmann::json::object();
};

struct LogHeader {
    int schema = 1;
    std::string backend;   // "sim" | "local"
    std::string time_unit; // "ticks" | "ms"
    std::optional<std::int64_t> seed;
    std::optional<std::int64_t> t_max_s;
    std::string policy = "affinity";
};

nlohmann::json to_json(const Event& e);
Event event_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LogHeader& h);
LogHeader header_from_json(const nlohmann::json& j);

/// Append-only run log. Thread-safe; seq numbers are the append order and
/// per-entity timestamps are clamped to be non-decreasing.
class EventLog {
public:
    Event append(Time t, std::string kind, std::string entity,
                 std::string from, std::string to,
                 nlohmann::json data = nlohmann::json::object());

    std::vector<Event> snapshot() const;
    std::size_t size() const;

    void write_jsonl(std::ostream& os, const LogHeader& header) const;

    struct Parsed {
        LogHeader header;
        std::vector<Event> events;
    };
    static Parsed read_jsonl(std::istream& is); // throws ParseError

private:
    mutable std::mutex mu_;
    std::vector<Event> events_;
    std::map<std::string, Time> last_t_;
    std::int64_t next_seq_ = 0;
};

} // namespace pilot
