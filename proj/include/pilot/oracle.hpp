#pragma once

#include "pilot/manifest.hpp"
#include "pilot/types.hpp"

namespace pilot {

/// Exhaustive reference for tiny sim workloads: tries every CU-to-pilot
/// assignment and, per pilot, every admission order, simulating FIFO slot
/// occupancy (slots are held through staging and execution, exactly like the
/// engine's agents) with staging fed from the manifest's initial data
/// placement. Returns the smallest achievable workload completion time.
///
/// Guard rails: at most 3 pilots and 6 CUs (InstanceTooLarge beyond that),
/// and only the restricted instance class the enumeration models —
/// throws std::invalid_argument for produced (output) DUs, sim_fail,
/// deferred submissions, a t_max budget, or a CU no pilot can ever hold.
/// Pilot walltimes and store capacities are assumed ample and are not
/// modeled.
Time optimal_makespan_oracle(const WorkloadManifest& m);

} // namespace pilot
