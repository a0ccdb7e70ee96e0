#pragma once

#include <stdexcept>
#include <string>

namespace wmlab {

/// Invalid model or algorithm parameter (beta out of range, theta outside (0,1), ...).
struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Evaluation point outside the admissible domain.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

/// Basis or boundary-constraint combination that cannot be built.
struct ConstraintError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Coefficient field that is non-positive where positivity is required.
struct CoefficientError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Bilinear form requested for coefficients it is not stated for.
struct UnsupportedError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Missing or inconsistent input data (verdict boundary traces, dimensions).
struct DataError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Numerical integrity failure: factorization breakdown, indefinite covariance.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Leading observation block too ill-conditioned to factor.
struct ConditioningError : NumericalError {
    ConditioningError(const std::string& what, double condition_estimate)
        : NumericalError(what + " (condition estimate " + std::to_string(condition_estimate) + ")"),
          condition(condition_estimate), message(what) {}
    double condition;
    std::string message;  // without the condition suffix
};

/// Experiment configuration rejected before any computation.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

}  // namespace wmlab
