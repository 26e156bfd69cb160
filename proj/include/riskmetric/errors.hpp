#ifndef RISKMETRIC_ERRORS_HPP
#define RISKMETRIC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace riskmetric {

// Malformed or inconsistent configuration (JSON schema, parameter ranges
// that make an object ill-formed). CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A mathematically invalid query on a well-formed object (probability
// outside [0,1], utility evaluated outside its domain, ...). Exit code 1.
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A solver route was asked to run on inputs that violate the assumptions
// it needs. Callers may fall back to the general solver. Exit code 1.
struct PreconditionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Adaptive integration failed to meet its tolerance. Carries the best
// estimate so far and the error bound actually achieved.
struct QuadratureError : std::runtime_error {
    double estimate;
    double error_bound;
    QuadratureError(const std::string& msg, double est, double err)
        : std::runtime_error(msg), estimate(est), error_bound(err) {}
};

} // namespace riskmetric

#endif
