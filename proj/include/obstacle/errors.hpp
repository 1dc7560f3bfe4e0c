#pragma once

#include <stdexcept>
#include <string>

namespace obstacle {

/// Raised when a numerical method fails to produce a solution (cycling,
/// iteration caps, infeasible data).
class SolverError : public std::runtime_error {
public:
    enum class Kind { infeasible, non_convergence, line_search };

    SolverError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// Raised for inputs outside an operation's domain (bad parameters, grid
/// mismatch, violated preconditions).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace obstacle
