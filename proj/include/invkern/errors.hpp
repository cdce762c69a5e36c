#pragma once

#include <stdexcept>
#include <string>

namespace invkern {

inline constexpr const char* version = "0.1.0";

// Invalid parameters, descriptors, or config files.  CLI exit code 2.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Compute-budget violations (enumeration caps, kernel-eval caps).  CLI exit code 3.
struct budget_error : std::runtime_error {
    explicit budget_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failures: non-convergent quadrature, factorization failure, integer overflow.
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace invkern
