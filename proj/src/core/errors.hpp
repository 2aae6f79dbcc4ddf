#pragma once

#include <stdexcept>
#include <string>

namespace epi {

/// Invalid user configuration (bad grid sizes, negative rates, malformed scenario files).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical procedure failed (singular system, non-convergence, non-finite values).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A mathematical precondition does not hold, e.g. asking for the endemic state with R0 <= 1.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace epi
