#pragma once

#include <stdexcept>
#include <string>

namespace qvi {

/// Bad configuration content (schema, constants, dimension mismatches).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Declared standing-assumption violated (distinct from ConfigError so the
/// CLI can honor --force for these and only these).
struct AssumptionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Semantically invalid request (zero paths, impossible tolerances).
/// Shares the AssumptionError exit code but is never bypassed by --force.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Missing or unreadable file.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// On-disk artifact is present but inconsistent (truncated, non-numeric,
/// wrong shape).
struct IntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical routine failed to converge or was fed unusable data.
struct SolveError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace qvi
