#pragma once

#include <stdexcept>
#include <string>

namespace dpbe {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Iterative solver did not reach its tolerance.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual)
        : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
          residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Off-grid time or level lookup.
class IndexError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Memory or compute budget exceeded.
class BudgetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operation applied to the wrong kind of object (e.g. a point-to-point table
/// where a stationary one is required).
class KindError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace dpbe
