#include "pilot/registry.hpp"

#include <algorithm>

#include "pilot/errors.hpp"

namespace pilot {

namespace {

nlohmann::json pilot_value(const PilotRecord& r) {
    return {{"state", to_string(r.state)}};
}

nlohmann::json cu_value(const CuRecord& r) {
    return {{"state", to_string(r.state)}, {"retries", r.retry_count}, {"pilot", r.pilot}};
}

nlohmann::json du_value(const DuRecord& r) {
    return {{"state", to_string(r.state)},
            {"replicas", std::vector<std::string>(r.replicas.begin(), r.replicas.end())},
            {"bytes", r.bytes}};
}

PilotRecord parse_pilot(const nlohmann::json& v) {
    PilotRecord r;
    r.state = *pilot_state_from(v.at("state").get<std::string>());
    return r;
}

CuRecord parse_cu(const nlohmann::json& v) {
    CuRecord r;
    r.state = *cu_state_from(v.at("state").get<std::string>());
    r.retry_count = v.at("retries").get<int>();
    r.pilot = v.at("pilot").get<std::string>();
    return r;
}

DuRecord parse_du(const nlohmann::json& v) {
    DuRecord r;
    r.state = *du_state_from(v.at("state").get<std::string>());
    for (const auto& x : v.at("replicas")) r.replicas.insert(x.get<std::string>());
    r.bytes = v.at("bytes").get<std::int64_t>();
    return r;
}

} // namespace

void Registry::create_pilot(const PilotDescription& d, Time t) {
    {
        std::lock_guard<std::mutex> lock(mu_);
        if (!pilots_.emplace(d.id, d).second)
            throw DuplicatePilotId("pilot id already registered: " + d.id);
        pilot_order_.push_back(d.id);
    }
    store_.cas_put(entity_key(EntityKind::Pilot, d.id), 0, pilot_value({}).dump());
    log_.append(t, "state", entity_key(EntityKind::Pilot, d.id), "", "NEW",
                {{"cores", d.cores},
                 {"walltime_s", d.walltime_s},
                 {"affinity", d.affinity},
                 {"capacity", d.store_capacity_bytes},
                 {"queue_delay_s", d.queue_delay_s},
                 {"resource", d.resource}});
}

void Registry::create_cu(const ComputeUnitDescription& d, Time t) {
    {
        std::lock_guard<std::mutex> lock(mu_);
        if (!cus_.emplace(d.id, d).second)
            throw DuplicateCUId("cu id already registered: " + d.id);
        cu_order_.push_back(d.id);
    }
    store_.cas_put(entity_key(EntityKind::Cu, d.id), 0, cu_value({}).dump());
    nlohmann::json data{{"cores", d.cores},
                        {"max_retries", d.max_retries},
                        {"inputs", d.input_data},
                        {"outputs", d.output_data}};
    if (d.sim_duration_s) data["sim_duration_s"] = *d.sim_duration_s;
    log_.append(t, "state", entity_key(EntityKind::Cu, d.id), "", "NEW", data);
}

void Registry::create_du(const DataUnitDescription& d, Time t) {
    {
        std::lock_guard<std::mutex> lock(mu_);
        if (!dus_.emplace(d.id, d).second)
            throw DuplicateDUId("du id already registered: " + d.id);
        du_order_.push_back(d.id);
    }
    DuRecord r;
    r.bytes = d.size_bytes;
    store_.cas_put(entity_key(EntityKind::Du, d.id), 0, du_value(r).dump());
    log_.append(t, "state", entity_key(EntityKind::Du, d.id), "", "NEW",
                {{"size", d.size_bytes}, {"affinity", d.affinity}, {"initial", d.initial_store}});
}

Event Registry::transition(EntityKind kind, const std::string& id, std::string_view from,
                           std::string_view to, Time t, nlohmann::json data) {
    const std::string key = entity_key(kind, id);
    for (;;) {
        auto rec = store_.get(key);
        if (!rec) throw UnknownEntity("no such entity: " + key);
        auto value = nlohmann::json::parse(rec->value);
        const std::string current = value.at("state").get<std::string>();
        if (current != from)
            throw StaleFrom(key + ": current state " + current + ", caller expected " +
                            std::string(from));

        bool legal = false;
        switch (kind) {
            case EntityKind::Pilot: {
                auto f = pilot_state_from(from), g = pilot_state_from(to);
                legal = f && g && pilot_edge_legal(*f, *g);
                break;
            }
            case EntityKind::Cu: {
                auto f = cu_state_from(from), g = cu_state_from(to);
                legal = f && g && cu_edge_legal(*f, *g);
                break;
            }
            case EntityKind::Du: {
                auto f = du_state_from(from), g = du_state_from(to);
                legal = f && g && du_edge_legal(*f, *g);
                break;
            }
        }
        if (!legal)
            throw IllegalTransition(key + ": no edge " + std::string(from) + " -> " +
                                    std::string(to));

        if (kind == EntityKind::Cu) {
            if (from == "FAILED" && to == "UNSCHEDULED") {
                const int retries = value.at("retries").get<int>();
                int max_retries = 0;
                {
                    std::lock_guard<std::mutex> lock(mu_);
                    auto it = cus_.find(id);
                    if (it != cus_.end()) max_retries = it->second.max_retries;
                }
                if (retries >= max_retries)
                    throw IllegalTransition(key + ": retries exhausted (" +
                                            std::to_string(retries) + "/" +
                                            std::to_string(max_retries) + ")");
                value["retries"] = retries + 1;
                value["pilot"] = "";
                data["retry"] = retries + 1;
            } else if (from == "UNSCHEDULED" && to == "PENDING") {
                value["pilot"] = data.at("pilot");
            } else if (from == "PENDING" && to == "UNSCHEDULED") {
                value["pilot"] = "";
            }
        }
        value["state"] = std::string(to);

        try {
            store_.cas_put(key, rec->version, value.dump());
        } catch (const VersionConflict&) {
            continue; // lost a race; re-read and re-check from_state
        }
        return log_.append(t, "state", key, std::string(from), std::string(to),
                           std::move(data));
    }
}

Event Registry::du_add_replica(const std::string& id, const std::string& location,
                               std::int64_t bytes, Time t, const std::string& origin) {
    du_merge_replica(id, location);
    if (bytes >= 0) {
        const std::string key = entity_key(EntityKind::Du, id);
        for (;;) {
            auto rec = store_.get(key);
            auto value = nlohmann::json::parse(rec->value);
            value["bytes"] = bytes;
            try {
                store_.cas_put(key, rec->version, value.dump());
                break;
            } catch (const VersionConflict&) {}
        }
    }
    return log_.append(t, "replica", entity_key(EntityKind::Du, id), "", "",
                       {{"store", location}, {"bytes", bytes}, {"origin", origin}});
}

void Registry::du_merge_replica(const std::string& id, const std::string& location) {
    const std::string key = entity_key(EntityKind::Du, id);
    for (;;) {
        auto rec = store_.get(key);
        if (!rec) throw UnknownEntity("no such entity: " + key);
        auto r = parse_du(nlohmann::json::parse(rec->value));
        r.replicas.insert(location);
        auto value = nlohmann::json::parse(rec->value);
        value["replicas"] = std::vector<std::string>(r.replicas.begin(), r.replicas.end());
        try {
            store_.cas_put(key, rec->version, value.dump());
            return;
        } catch (const VersionConflict&) {}
    }
}

PilotRecord Registry::pilot_record(const std::string& id) const {
    auto rec = store_.get(entity_key(EntityKind::Pilot, id));
    if (!rec) throw UnknownEntity("no such pilot: " + id);
    return parse_pilot(nlohmann::json::parse(rec->value));
}

CuRecord Registry::cu_record(const std::string& id) const {
    auto rec = store_.get(entity_key(EntityKind::Cu, id));
    if (!rec) throw UnknownEntity("no such cu: " + id);
    return parse_cu(nlohmann::json::parse(rec->value));
}

DuRecord Registry::du_record(const std::string& id) const {
    auto rec = store_.get(entity_key(EntityKind::Du, id));
    if (!rec) throw UnknownEntity("no such du: " + id);
    return parse_du(nlohmann::json::parse(rec->value));
}

bool Registry::exists(EntityKind kind, const std::string& id) const {
    return store_.get(entity_key(kind, id)).has_value();
}

const PilotDescription& Registry::pilot_desc(const std::string& id) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = pilots_.find(id);
    if (it == pilots_.end()) throw UnknownEntity("no such pilot: " + id);
    return it->second;
}

const ComputeUnitDescription& Registry::cu_desc(const std::string& id) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cus_.find(id);
    if (it == cus_.end()) throw UnknownEntity("no such cu: " + id);
    return it->second;
}

const DataUnitDescription& Registry::du_desc(const std::string& id) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = dus_.find(id);
    if (it == dus_.end()) throw UnknownEntity("no such du: " + id);
    return it->second;
}

bool Registry::has_pilot_desc(const std::string& id) const {
    std::lock_guard<std::mutex> lock(mu_);
    return pilots_.count(id) > 0;
}

bool Registry::has_cu_desc(const std::string& id) const {
    std::lock_guard<std::mutex> lock(mu_);
    return cus_.count(id) > 0;
}

bool Registry::has_du_desc(const std::string& id) const {
    std::lock_guard<std::mutex> lock(mu_);
    return dus_.count(id) > 0;
}

std::vector<std::string> Registry::pilot_ids() const {
    std::lock_guard<std::mutex> lock(mu_);
    return pilot_order_;
}

std::vector<std::string> Registry::cu_ids() const {
    std::lock_guard<std::mutex> lock(mu_);
    return cu_order_;
}

std::vector<std::string> Registry::du_ids() const {
    std::lock_guard<std::mutex> lock(mu_);
    return du_order_;
}

} // namespace pilot
