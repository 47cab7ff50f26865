#include "pilot/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "pilot/errors.hpp"

namespace pilot {

std::int64_t BandwidthMatrix::rate(const std::string& a, const std::string& b) const {
    auto look = [&](const std::string& x, const std::string& y) -> std::optional<std::int64_t> {
        auto it = rates.find(x);
        if (it == rates.end()) return std::nullopt;
        auto jt = it->second.find(y);
        if (jt == it->second.end()) return std::nullopt;
        return jt->second;
    };
    if (auto r = look(a, b)) return *r;
    if (auto r = look(b, a)) return *r;
    return default_rate;
}

ValidationFailed::ValidationFailed(std::vector<Violation> v)
    : Error("manifest validation failed with " + std::to_string(v.size()) + " violation(s)"),
      violations(std::move(v)) {}

std::optional<BackendKind> manifest_backend(const WorkloadManifest& m) {
    for (const auto& p : m.pilots)
        if (auto b = resource_backend(p.resource)) return b;
    return std::nullopt;
}

namespace {

bool relative_path_ok(const std::string& f) {
    if (f.empty() || f.front() == '/') return false;
    for (const auto& part : affinity_components(f)) // reuse the '/' splitter
        if (part == "..") return false;
    return true;
}

} // namespace

std::vector<Violation> validate_manifest(const WorkloadManifest& m) {
    std::vector<Violation> out;
    auto flag = [&](const std::string& entity, std::string rule) {
        out.push_back({entity, std::move(rule)});
    };

    std::set<std::string> ids; // unique across kinds: keys are kind-prefixed downstream
    auto claim_id = [&](const std::string& id, const char* what) {
        if (id.empty()) {
            flag(id, std::string(what) + " id must be non-empty");
            return;
        }
        if (!ids.insert(id).second) flag(id, "id declared more than once in manifest");
    };

    std::optional<BackendKind> backend;
    bool mixed = false;
    std::set<std::string> pilot_ids;
    std::map<std::string, std::int64_t> preplaced_bytes;
    for (const auto& p : m.pilots) {
        claim_id(p.id, "pilot");
        pilot_ids.insert(p.id);
        auto b = resource_backend(p.resource);
        if (!b) {
            flag(p.id, "resource must be local:// or sim://<endpoint>");
        } else if (!backend) {
            backend = b;
        } else if (*backend != *b) {
            mixed = true;
        }
        if (p.cores < 1) flag(p.id, "cores must be >= 1");
        if (p.walltime_s < 1) flag(p.id, "walltime_s must be >= 1");
        if (!affinity_label_valid(p.affinity))
            flag(p.id, "affinity must match [A-Za-z0-9_-]+(/[A-Za-z0-9_-]+)*");
        if (p.store_capacity_bytes < 0) flag(p.id, "store_capacity_bytes must be >= 0");
        if (p.queue_delay_s < 0) flag(p.id, "queue_delay_s must be >= 0");
        if (p.queue_delay_s > 0 && b && *b == BackendKind::Local)
            flag(p.id, "queue_delay_s applies to sim:// pilots only");
    }
    if (mixed) flag("", "all pilots must use the same resource scheme");

    std::set<std::string> du_ids;
    std::map<std::string, std::string> produced_by; // du -> cu
    for (const auto& c : m.compute_units)
        for (const auto& d : c.output_data)
            if (!produced_by.emplace(d, c.id).second)
                flag(d, "du is declared as the output of more than one cu");

    const bool sim = backend && *backend == BackendKind::Sim;
    const bool local = backend && *backend == BackendKind::Local;

    for (const auto& d : m.data_units) {
        claim_id(d.id, "du");
        du_ids.insert(d.id);
        if (d.files.empty()) flag(d.id, "files must be non-empty");
        for (const auto& f : d.files)
            if (!relative_path_ok(f))
                flag(d.id, "file path must be relative and must not contain '..': " + f);
        if (d.size_bytes < 0) flag(d.id, "size_bytes must be >= 0");
        if (!d.affinity.empty() && !affinity_label_valid(d.affinity))
            flag(d.id, "affinity must be empty or match [A-Za-z0-9_-]+(/[A-Za-z0-9_-]+)*");
        const bool is_output = produced_by.count(d.id) > 0;
        if (d.initial_store.empty()) {
            if (!is_output)
                flag(d.id, "du has no initial_store and is not produced by any cu");
        } else if (is_output) {
            flag(d.id, "output du must not declare an initial_store");
        } else if (d.initial_store != kExternalSource) {
            if (!pilot_ids.count(d.initial_store))
                flag(d.id, "initial_store does not name a declared pilot: " + d.initial_store);
            else
                preplaced_bytes[d.initial_store] += d.size_bytes;
        }
    }

    for (const auto& p : m.pilots) {
        auto it = preplaced_bytes.find(p.id);
        if (it != preplaced_bytes.end() && it->second > p.store_capacity_bytes)
            flag(p.id, "pre-placed data units exceed store_capacity_bytes");
    }

    for (const auto& c : m.compute_units) {
        claim_id(c.id, "cu");
        if (c.cores < 1) flag(c.id, "cores must be >= 1");
        if (c.max_retries < 0) flag(c.id, "max_retries must be >= 0");
        if (c.submit_at_s < 0) flag(c.id, "submit_at_s must be >= 0");
        std::set<std::string> inputs(c.input_data.begin(), c.input_data.end());
        for (const auto& d : c.input_data)
            if (!du_ids.count(d)) flag(c.id, "unresolved input du: " + d);
        for (const auto& d : c.output_data) {
            if (!du_ids.count(d)) flag(c.id, "unresolved output du: " + d);
            if (inputs.count(d)) flag(c.id, "du cannot be both input and output: " + d);
        }
        if (sim) {
            if (!c.sim_duration_s)
                flag(c.id, "sim_duration_s is required when pilots use the sim backend");
            else if (*c.sim_duration_s <= 0)
                flag(c.id, "sim_duration_s must be > 0");
        }
        if (local && c.executable.empty())
            flag(c.id, "executable must be non-empty under the local backend");
    }

    if (m.bandwidth.default_rate <= 0) flag("", "bandwidth default must be > 0");
    for (const auto& [a, row] : m.bandwidth.rates) {
        for (const auto& [b, v] : row) {
            if (v <= 0) flag("", "bandwidth " + a + " -> " + b + " must be > 0");
            auto rev = m.bandwidth.rates.find(b);
            if (rev != m.bandwidth.rates.end()) {
                auto back = rev->second.find(a);
                if (back != rev->second.end() && back->second != v)
                    flag("", "bandwidth matrix is asymmetric for " + a + " <-> " + b);
            }
        }
    }

    if (m.t_max_s && *m.t_max_s <= 0) flag("", "t_max_s must be > 0");
    return out;
}

// ---------------------------------------------------------------------------

namespace {

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ParseError(where + ": unknown field '" + it.key() + "'");
}

template <typename T>
T field(const nlohmann::json& j, const char* name, T fallback, const std::string& where) {
    if (!j.contains(name)) return fallback;
    try {
        return j.at(name).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParseError(where + ": field '" + name + "' has the wrong type");
    }
}

template <typename T>
T required(const nlohmann::json& j, const char* name, const std::string& where) {
    if (!j.contains(name)) throw ParseError(where + ": missing field '" + name + "'");
    try {
        return j.at(name).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParseError(where + ": field '" + name + "' has the wrong type");
    }
}

} // namespace

WorkloadManifest manifest_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("manifest: top level must be an object");
    check_keys(j, {"pilots", "data_units", "compute_units", "bandwidth", "t_max_s", "seed"},
               "manifest");
    WorkloadManifest m;

    for (const auto& pj : field<nlohmann::json>(j, "pilots", nlohmann::json::array(), "manifest")) {
        const std::string where = "pilot '" + pj.value("id", std::string("?")) + "'";
        check_keys(pj, {"id", "resource", "cores", "walltime_s", "affinity",
                        "store_capacity_bytes", "queue_delay_s"}, where);
        PilotDescription p;
        p.id = required<std::string>(pj, "id", where);
        p.resource = required<std::string>(pj, "resource", where);
        p.cores = field<int>(pj, "cores", 1, where);
        p.walltime_s = required<std::int64_t>(pj, "walltime_s", where);
        p.affinity = required<std::string>(pj, "affinity", where);
        p.store_capacity_bytes = field<std::int64_t>(pj, "store_capacity_bytes", 0, where);
        p.queue_delay_s = field<std::int64_t>(pj, "queue_delay_s", 0, where);
        m.pilots.push_back(std::move(p));
    }

    for (const auto& dj : field<nlohmann::json>(j, "data_units", nlohmann::json::array(), "manifest")) {
        const std::string where = "du '" + dj.value("id", std::string("?")) + "'";
        check_keys(dj, {"id", "files", "size_bytes", "affinity", "initial_store"}, where);
        DataUnitDescription d;
        d.id = required<std::string>(dj, "id", where);
        d.files = required<std::vector<std::string>>(dj, "files", where);
        d.size_bytes = field<std::int64_t>(dj, "size_bytes", 0, where);
        d.affinity = field<std::string>(dj, "affinity", std::string(), where);
        d.initial_store = field<std::string>(dj, "initial_store", std::string(), where);
        m.data_units.push_back(std::move(d));
    }

    for (const auto& cj : field<nlohmann::json>(j, "compute_units", nlohmann::json::array(), "manifest")) {
        const std::string where = "cu '" + cj.value("id", std::string("?")) + "'";
        check_keys(cj, {"id", "executable", "args", "cores", "input_data", "output_data",
                        "sim_duration_s", "sim_fail", "max_retries", "submit_at_s"}, where);
        ComputeUnitDescription c;
        c.id = required<std::string>(cj, "id", where);
        c.executable = field<std::string>(cj, "executable", std::string(), where);
        c.args = field<std::vector<std::string>>(cj, "args", {}, where);
        c.cores = field<int>(cj, "cores", 1, where);
        c.input_data = field<std::vector<std::string>>(cj, "input_data", {}, where);
        c.output_data = field<std::vector<std::string>>(cj, "output_data", {}, where);
        if (cj.contains("sim_duration_s"))
            c.sim_duration_s = required<double>(cj, "sim_duration_s", where);
        c.sim_fail = field<bool>(cj, "sim_fail", false, where);
        c.max_retries = field<int>(cj, "max_retries", 0, where);
        c.submit_at_s = field<Time>(cj, "submit_at_s", 0, where);
        m.compute_units.push_back(std::move(c));
    }

    if (j.contains("bandwidth")) {
        const auto& bj = j.at("bandwidth");
        check_keys(bj, {"default", "rates"}, "bandwidth");
        m.bandwidth.default_rate = field<std::int64_t>(bj, "default", 1'000'000, "bandwidth");
        if (bj.contains("rates")) {
            if (!bj.at("rates").is_object())
                throw ParseError("bandwidth: 'rates' must be an object of objects");
            for (auto it = bj.at("rates").begin(); it != bj.at("rates").end(); ++it) {
                if (!it.value().is_object())
                    throw ParseError("bandwidth: 'rates." + it.key() + "' must be an object");
                for (auto jt = it.value().begin(); jt != it.value().end(); ++jt) {
                    if (!jt.value().is_number_integer())
                        throw ParseError("bandwidth: rate " + it.key() + " -> " + jt.key() +
                                         " must be an integer");
                    m.bandwidth.rates[it.key()][jt.key()] = jt.value().get<std::int64_t>();
                }
            }
        }
    }

    if (j.contains("t_max_s") && !j.at("t_max_s").is_null())
        m.t_max_s = required<std::int64_t>(j, "t_max_s", "manifest");
    if (j.contains("seed") && !j.at("seed").is_null())
        m.seed = required<std::int64_t>(j, "seed", "manifest");
    return m;
}

nlohmann::json manifest_to_json(const WorkloadManifest& m) {
    nlohmann::json j;
    j["pilots"] = nlohmann::json::array();
    for (const auto& p : m.pilots)
        j["pilots"].push_back({{"id", p.id},
                               {"resource", p.resource},
                               {"cores", p.cores},
                               {"walltime_s", p.walltime_s},
                               {"affinity", p.affinity},
                               {"store_capacity_bytes", p.store_capacity_bytes},
                               {"queue_delay_s", p.queue_delay_s}});
    j["data_units"] = nlohmann::json::array();
    for (const auto& d : m.data_units) {
        nlohmann::json dj{{"id", d.id},
                          {"files", d.files},
                          {"size_bytes", d.size_bytes},
                          {"affinity", d.affinity}};
        if (!d.initial_store.empty()) dj["initial_store"] = d.initial_store;
        j["data_units"].push_back(std::move(dj));
    }
    j["compute_units"] = nlohmann::json::array();
    for (const auto& c : m.compute_units) {
        nlohmann::json cj{{"id", c.id},
                          {"executable", c.executable},
                          {"args", c.args},
                          {"cores", c.cores},
                          {"input_data", c.input_data},
                          {"output_data", c.output_data},
                          {"max_retries", c.max_retries}};
        if (c.sim_duration_s) cj["sim_duration_s"] = *c.sim_duration_s;
        if (c.sim_fail) cj["sim_fail"] = true;
        if (c.submit_at_s != 0) cj["submit_at_s"] = c.submit_at_s;
        j["compute_units"].push_back(std::move(cj));
    }
    if (!m.bandwidth.rates.empty() || m.bandwidth.default_rate != 1'000'000) {
        j["bandwidth"] = {{"default", m.bandwidth.default_rate}};
        if (!m.bandwidth.rates.empty()) {
            nlohmann::json rates = nlohmann::json::object();
            for (const auto& [a, row] : m.bandwidth.rates) {
                for (const auto& [b, v] : row) rates[a][b] = v;
            }
            j["bandwidth"]["rates"] = std::move(rates);
        }
    }
    if (m.t_max_s) j["t_max_s"] = *m.t_max_s;
    if (m.seed) j["seed"] = *m.seed;
    return j;
}

WorkloadManifest parse_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open manifest: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& ex) {
        throw ParseError(path.string() + ": " + ex.what());
    }
    auto m = manifest_from_json(j);
    auto violations = validate_manifest(m);
    if (!violations.empty()) throw ValidationFailed(std::move(violations));
    return m;
}

} // namespace pilot
