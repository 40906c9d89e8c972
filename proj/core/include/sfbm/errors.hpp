#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sfbm {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A computation produced a result that cannot be trusted (indefinite
/// covariance, non-finite state, a violated hypothesis).
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Path generator could not produce a sample for the requested grid.
class GeneratorFailure : public NumericalFailure {
public:
    using NumericalFailure::NumericalFailure;
};

/// Integrator hit a non-finite value; carries the offending step.
class SolverFailure : public NumericalFailure {
public:
    SolverFailure(const std::string& what, std::size_t step)
        : NumericalFailure(what + " (step " + std::to_string(step) + ")"), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Hypotheses of the comparison criterion failed at a visited point.
class HypothesisViolation : public NumericalFailure {
public:
    HypothesisViolation(const std::string& what, std::size_t step)
        : NumericalFailure(what + " (step " + std::to_string(step) + ")"), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

}  // namespace sfbm
