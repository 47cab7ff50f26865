#pragma once

#include <stdexcept>
#include <string>

namespace pilot {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// state machine / registry
struct IllegalTransition : Error { using Error::Error; };
struct StaleFrom : Error { using Error::Error; };
struct UnknownEntity : Error { using Error::Error; };

// coordination
struct VersionConflict : Error { using Error::Error; };
struct UnknownPilot : Error { using Error::Error; };

// scheduler
struct DuplicateSU : Error { using Error::Error; };
struct InstanceTooLarge : Error { using Error::Error; };

// data service
struct UnknownStore : Error { using Error::Error; };
struct CapacityExceeded : Error { using Error::Error; };
struct SourceUnavailable : Error { using Error::Error; };

// compute service
struct DuplicatePilotId : Error { using Error::Error; };
struct DuplicateCUId : Error { using Error::Error; };
struct DuplicateDUId : Error { using Error::Error; };
struct UnresolvedDU : Error { using Error::Error; };
struct BackendUnavailable : Error { using Error::Error; };
struct AlreadyTerminal : Error { using Error::Error; };

// agent / backends
struct SpawnFailure : Error { using Error::Error; };
struct MissingDuration : Error { using Error::Error; };
struct EmptyQueue : Error { using Error::Error; };
struct CausalityViolation : Error { using Error::Error; };

// workload io
struct ParseError : Error { using Error::Error; };
struct IncompleteLog : Error { using Error::Error; };

} // namespace pilot
