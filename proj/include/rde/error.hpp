#pragma once

#include <stdexcept>
#include <string>

namespace rde {

// Base of every error thrown by the library. The CLI maps all of these to
// exit status 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation (x outside [0,1],
// alpha beyond the rate function's domain, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

class IndexError : public Error {
public:
    using Error::Error;
};

// Malformed or inconsistent construction input (probabilities, branches,
// configuration files).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// An iterative solver ran out of iterations. Usually means there is no
// spectral gap / no dominant eigenvalue.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class ResourceError : public Error {
public:
    using Error::Error;
};

// sigma^2 is (numerically) zero where a non-degenerate limit is required.
class DegenerateVarianceError : public Error {
public:
    using Error::Error;
};

// A Monte Carlo tail estimate saw no events.
class StarvationError : public Error {
public:
    using Error::Error;
};

}  // namespace rde
