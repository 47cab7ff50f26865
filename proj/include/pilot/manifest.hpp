#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pilot/errors.hpp"
#include "pilot/types.hpp"

namespace pilot {

/// Symmetric site-to-site rates in bytes/s, keyed by the first affinity
/// component. Pairs not listed fall back to default_rate.
struct BandwidthMatrix {
    std::int64_t default_rate = 1'000'000;
    std::map<std::string, std::map<std::string, std::int64_t>> rates;

    std::int64_t rate(const std::string& a, const std::string& b) const;
};

struct WorkloadManifest {
    std::vector<PilotDescription> pilots;
    std::vector<DataUnitDescription> data_units;
    std::vector<ComputeUnitDescription> compute_units;
    BandwidthMatrix bandwidth;
    std::optional<std::int64_t> t_max_s;
    std::optional<std::int64_t> seed;
};

struct Violation {
    std::string entity; // offending id, or "" for manifest-level rules
    std::string rule;
};

/// Violations are data, not exceptions: an empty list means every type
/// invariant holds and every cross-reference (DU ids, pilot ids) resolves.
std::vector<Violation> validate_manifest(const WorkloadManifest& m);

/// Backend implied by the pilots' resource strings. nullopt when the manifest
/// has no pilots; mixed schemes are a validation violation.
std::optional<BackendKind> manifest_backend(const WorkloadManifest& m);

/// Thrown by parse_manifest when the manifest is structurally fine but
/// invariants are broken; carries the full violation list.
struct ValidationFailed : Error {
    explicit ValidationFailed(std::vector<Violation> v);
    std::vector<Violation> violations;
};

WorkloadManifest manifest_from_json(const nlohmann::json& j); // throws ParseError
nlohmann::json manifest_to_json(const WorkloadManifest& m);

/// Parses and validates; all violations are reported at once.
WorkloadManifest parse_manifest(const std::filesystem::path& path);

} // namespace pilot
