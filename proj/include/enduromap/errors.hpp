#pragma once

#include <stdexcept>
#include <string>

namespace enduromap {

// Bad flag/config/parameter values. CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (workload files, solutions). CLI exit code 2.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Device model cannot produce a transition for the given parameter set. CLI exit code 2.
struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Problem instance does not fit the hardware. CLI exit code 3.
struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Solver/linear-algebra failure. CLI exit code 4.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace enduromap
