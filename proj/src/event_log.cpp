#include "pilot/event_log.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include "pilot/errors.hpp"

namespace pilot {

nlohmann::json to_json(const Event& e) {
    return nlohmann::json{{"seq", e.seq}, {"t", e.t},       {"kind", e.kind},
                          {"entity", e.entity}, {"from", e.from}, {"to", e.to},
                          {"data", e.data}};
}

Event event_from_json(const nlohmann::json& j) {
    Event e;
    e.seq = j.at("seq").get<std::int64_t>();
    e.t = j.at("t").get<Time>();
    e.kind = j.at("kind").get<std::string>();
    e.entity = j.at("entity").get<std::string>();
    e.from = j.at("from").get<std::string>();
    e.to = j.at("to").get<std::string>();
    e.data = j.at("data");
    return e;
}

nlohmann::json to_json(const LogHeader& h) {
    nlohmann::json j{{"kind", "header"},
                     {"schema", h.schema},
                     {"backend", h.backend},
                     {"time_unit", h.time_unit},
                     {"policy", h.policy}};
    j["seed"] = h.seed ? nlohmann::json(*h.seed) : nlohmann::json(nullptr);
    j["t_max_s"] = h.t_max_s ? nlohmann::json(*h.t_max_s) : nlohmann::json(nullptr);
    return j;
}

LogHeader header_from_json(const nlohmann::json& j) {
    LogHeader h;
    h.schema = j.at("schema").get<int>();
    h.backend = j.at("backend").get<std::string>();
    h.time_unit = j.at("time_unit").get<std::string>();
    h.policy = j.value("policy", "affinity");
    if (j.contains("seed") && !j["seed"].is_null()) h.seed = j["seed"].get<std::int64_t>();
    if (j.contains("t_max_s") && !j["t_max_s"].is_null()) h.t_max_s = j["t_max_s"].get<std::int64_t>();
    return h;
}

Event EventLog::append(Time t, std::string kind, std::string entity,
                       std::string from, std::string to, nlohmann::json data) {
    std::lock_guard<std::mutex> lock(mu_);
    auto [it, inserted] = last_t_.try_emplace(entity, t);
    if (!inserted) {
        t = std::max(t, it->second);
        it->second = t;
    }
    Event e;
    e.seq = next_seq_++;
    e.t = t;
    e.kind = std::move(kind);
    e.entity = std::move(entity);
    e.from = std::move(from);
    e.to = std::move(to);
    e.data = std::move(data);
    events_.push_back(e);
    return e;
}

std::vector<Event> EventLog::snapshot() const {
    std::lock_guard<std::mutex> lock(mu_);
    return events_;
}

std::size_t EventLog::size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return events_.size();
}

void EventLog::write_jsonl(std::ostream& os, const LogHeader& header) const {
    os << to_json(header).dump() << '\n';
    for (const auto& e : snapshot()) os << to_json(e).dump() << '\n';
}

EventLog::Parsed EventLog::read_jsonl(std::istream& is) {
    Parsed out;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& ex) {
            throw ParseError("log line " + std::to_string(lineno) + ": " + ex.what());
        }
        try {
            if (!have_header) {
                if (j.value("kind", "") != "header")
                    throw ParseError("log line 1: missing header line");
                out.header = header_from_json(j);
                have_header = true;
            } else {
                out.events.push_back(event_from_json(j));
            }
        } catch (const nlohmann::json::exception& ex) {
            throw ParseError("log line " + std::to_string(lineno) + ": " + ex.what());
        }
    }
    if (!have_header) throw ParseError("empty log: no header line");
    return out;
}

} // namespace pilot
