#pragma once

#include <stdexcept>
#include <string>

namespace mmoment {

// Bad inputs: violated preconditions, malformed files, unsupported parameters.
struct domain_error : std::runtime_error {
    explicit domain_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Iteration caps exceeded, failed brackets, loss of positive definiteness mid-run.
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Rejected experiment configuration (unknown key, missing key, bad value).
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace mmoment
