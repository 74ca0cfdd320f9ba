#pragma once

#include <stdexcept>
#include <string>

namespace svp {

// Error taxonomy mirrors the CLI exit codes:
//   config_error      -> 2 (bad flags, out-of-range overrides)
//   format_error      -> 3 (malformed files, bad payload data)
//   infeasible_error  -> 4 (instance cannot be solved under the given limits)
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class format_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numeric payloads that violate data invariants (non-finite values,
// zero-norm descriptor rows). A subspecies of format problems.
class data_error : public format_error {
 public:
  using format_error::format_error;
};

class infeasible_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Soft group mass collapsed below the division guard during optimization.
class degenerate_group_error : public infeasible_error {
 public:
  using infeasible_error::infeasible_error;
};

// Per-subscene output blocks that do not line up with the execution plan.
class plan_violation_error : public data_error {
 public:
  using data_error::data_error;
};

}  // namespace svp
