#pragma once

#include <stdexcept>
#include <string>

namespace svbs {

/// Input outside the physical or mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Transport matrix without four distinct real eigenvalues.
class NonHyperbolicError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inconsistent sizes or grids.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or invalid experiment configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Broken internal invariant (should never surface for valid input).
class ConsistencyError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Fixed-point iteration that failed to reach its tolerance.
class IterationError : public std::runtime_error {
public:
    IterationError(const std::string& what, int iterations, double last_change)
        : std::runtime_error(what), iterations_(iterations), last_change_(last_change) {}

    int iterations() const { return iterations_; }
    double last_change() const { return last_change_; }

private:
    int iterations_;
    double last_change_;
};

/// Time step violating the CFL bound.
class StepError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values detected during a simulation.
class BlowUpError : public std::runtime_error {
public:
    BlowUpError(const std::string& what, double time) : std::runtime_error(what), time_(time) {}
    double time() const { return time_; }

private:
    double time_;
};

/// Process exit status of the command-line tool.
enum ExitStatus { kExitOk = 0, kExitInvalid = 1, kExitSolver = 2, kExitVerify = 3 };

/// Solver failures map to kExitSolver, everything else to kExitInvalid.
inline int exit_status(const std::exception& e) {
    if (dynamic_cast<const IterationError*>(&e) || dynamic_cast<const StepError*>(&e) ||
        dynamic_cast<const BlowUpError*>(&e))
        return kExitSolver;
    return kExitInvalid;
}

}  // namespace svbs
