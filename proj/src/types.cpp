#include "pilot/types.hpp"

#include <algorithm>

namespace pilot {

const char* to_string(PilotState s) {
    switch (s) {
        case PilotState::NEW: return "NEW";
        case PilotState::QUEUED: return "QUEUED";
        case PilotState::RUNNING: return "RUNNING";
        case PilotState::DONE: return "DONE";
        case PilotState::FAILED: return "FAILED";
        case PilotState::CANCELED: return "CANCELED";
    }
    return "?";
}

const char* to_string(CuState s) {
    switch (s) {
        case CuState::NEW: return "NEW";
        case CuState::UNSCHEDULED: return "UNSCHEDULED";
        case CuState::PENDING: return "PENDING";
        case CuState::STAGING: return "STAGING";
        case CuState::RUNNING: return "RUNNING";
        case CuState::DONE: return "DONE";
        case CuState::FAILED: return "FAILED";
        case CuState::CANCELED: return "CANCELED";
    }
    return "?";
}

const char* to_string(DuState s) {
    switch (s) {
        case DuState::NEW: return "NEW";
        case DuState::TRANSFERRING: return "TRANSFERRING";
        case DuState::READY: return "READY";
        case DuState::FAILED: return "FAILED";
        case DuState::REMOVED: return "REMOVED";
    }
    return "?";
}

std::optional<PilotState> pilot_state_from(std::string_view s) {
    for (auto st : {PilotState::NEW, PilotState::QUEUED, PilotState::RUNNING,
                    PilotState::DONE, PilotState::FAILED, PilotState::CANCELED})
        if (s == to_string(st)) return st;
    return std::nullopt;
}

std::optional<CuState> cu_state_from(std::string_view s) {
    for (auto st : {CuState::NEW, CuState::UNSCHEDULED, CuState::PENDING,
                    CuState::STAGING, CuState::RUNNING, CuState::DONE,
                    CuState::FAILED, CuState::CANCELED})
        if (s == to_string(st)) return st;
    return std::nullopt;
}

std::optional<DuState> du_state_from(std::string_view s) {
    for (auto st : {DuState::NEW, DuState::TRANSFERRING, DuState::READY,
                    DuState::FAILED, DuState::REMOVED})
        if (s == to_string(st)) return st;
    return std::nullopt;
}

bool is_terminal(PilotState s) {
    return s == PilotState::DONE || s == PilotState::FAILED || s == PilotState::CANCELED;
}

bool is_terminal(CuState s) {
    return s == CuState::DONE || s == CuState::FAILED || s == CuState::CANCELED;
}

bool is_terminal(DuState s) {
    return s == DuState::FAILED || s == DuState::REMOVED;
}

bool pilot_edge_legal(PilotState from, PilotState to) {
    using P = PilotState;
    switch (from) {
        case P::NEW: return to == P::QUEUED || to == P::CANCELED;
        case P::QUEUED: return to == P::RUNNING || to == P::CANCELED;
        case P::RUNNING: return to == P::DONE || to == P::FAILED || to == P::CANCELED;
        default: return false;
    }
}

bool cu_edge_legal(CuState from, CuState to) {
    using C = CuState;
    if (to == C::CANCELED) return !is_terminal(from);
    switch (from) {
        case C::NEW: return to == C::UNSCHEDULED;
        case C::UNSCHEDULED: return to == C::PENDING;
        // PENDING->UNSCHEDULED is the walltime/shutdown refund: the binding is
        // withdrawn before any slot was held, and no retry is consumed.
        case C::PENDING: return to == C::STAGING || to == C::UNSCHEDULED;
        case C::STAGING: return to == C::RUNNING || to == C::FAILED;
        case C::RUNNING: return to == C::DONE || to == C::FAILED;
        case C::FAILED: return to == C::UNSCHEDULED; // retry, gated by retry_count
        default: return false;
    }
}

bool du_edge_legal(DuState from, DuState to) {
    using D = DuState;
    switch (from) {
        case D::NEW: return to == D::TRANSFERRING || to == D::READY || to == D::FAILED;
        case D::TRANSFERRING: return to == D::READY || to == D::FAILED;
        case D::READY: return to == D::TRANSFERRING || to == D::REMOVED;
        default: return false;
    }
}

const char* to_string(EntityKind k) {
    switch (k) {
        case EntityKind::Pilot: return "pilot";
        case EntityKind::Cu: return "cu";
        case EntityKind::Du: return "du";
    }
    return "?";
}

std::string entity_key(EntityKind k, std::string_view id) {
    std::string key = to_string(k);
    key += '/';
    key += id;
    return key;
}

// ---------------------------------------------------------------------------

static bool component_char(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
           (c >= '0' && c <= '9') || c == '_' || c == '-';
}

bool affinity_label_valid(std::string_view label) {
    if (label.empty()) return false;
    bool in_component = false;
    for (char c : label) {
        if (c == '/') {
            if (!in_component) return false; // empty component
            in_component = false;
        } else if (component_char(c)) {
            in_component = true;
        } else {
            return false;
        }
    }
    return in_component; // must not end with '/'
}

std::vector<std::string> affinity_components(std::string_view label) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= label.size()) {
        auto slash = label.find('/', start);
        if (slash == std::string_view::npos) {
            if (start < label.size()) out.emplace_back(label.substr(start));
            break;
        }
        out.emplace_back(label.substr(start, slash - start));
        start = slash + 1;
    }
    return out;
}

int affinity_distance(std::string_view a, std::string_view b) {
    if (a.empty() || b.empty()) return 0;
    auto ca = affinity_components(a);
    auto cb = affinity_components(b);
    int n = 0;
    for (std::size_t i = 0; i < std::min(ca.size(), cb.size()); ++i) {
        if (ca[i] != cb[i]) break;
        ++n;
    }
    return n;
}

std::string affinity_site(std::string_view label) {
    auto slash = label.find('/');
    if (slash == std::string_view::npos) return std::string(label);
    return std::string(label.substr(0, slash));
}

const char* to_string(BackendKind k) {
    return k == BackendKind::Sim ? "sim" : "local";
}

std::optional<BackendKind> resource_backend(std::string_view resource) {
    if (resource.rfind("local://", 0) == 0) return BackendKind::Local;
    if (resource.rfind("sim://", 0) == 0) return BackendKind::Sim;
    return std::nullopt;
}

} // namespace pilot
