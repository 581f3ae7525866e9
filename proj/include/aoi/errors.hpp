#pragma once

#include <stdexcept>
#include <string>

namespace aoi {

/// Parameters outside the admissible range (e.g. a cost/channel pair whose
/// tail sums diverge).
struct RejectedParameters : std::invalid_argument {
    explicit RejectedParameters(const std::string& what) : std::invalid_argument(what) {}
};

/// A certified series truncation failed to reach its tolerance within the
/// term budget.
struct NonConvergent : std::runtime_error {
    explicit NonConvergent(const std::string& what) : std::runtime_error(what) {}
};

/// A threshold scan hit its cap before the defining inequality was met.
struct NoSolutionWithinCap : std::runtime_error {
    explicit NoSolutionWithinCap(const std::string& what) : std::runtime_error(what) {}
};

/// Relative value iteration exhausted its sweep budget.
struct NotConverged : std::runtime_error {
    explicit NotConverged(const std::string& what) : std::runtime_error(what) {}
};

/// Bisection could not bracket an idle/schedule flip.
struct NoFlip : std::runtime_error {
    explicit NoFlip(const std::string& what) : std::runtime_error(what) {}
};

/// A product state space exceeded the configured size limit.
struct CapacityExceeded : std::runtime_error {
    explicit CapacityExceeded(const std::string& what) : std::runtime_error(what) {}
};

/// A tabulated policy was queried outside its solved state range.
struct OutOfTable : std::runtime_error {
    explicit OutOfTable(const std::string& what) : std::runtime_error(what) {}
};

/// Two result tables do not share the same parameter grid.
struct GridMismatch : std::runtime_error {
    explicit GridMismatch(const std::string& what) : std::runtime_error(what) {}
};

} // namespace aoi
