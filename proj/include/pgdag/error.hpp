#pragma once

#include <stdexcept>
#include <string>

namespace pgdag {

/// Invalid parameter value (threshold outside (0,1), negative weights, ...).
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Malformed or unreadable input file, or inconsistent shapes between inputs.
class LoadError : public std::runtime_error {
public:
    explicit LoadError(const std::string& what) : std::runtime_error(what) {}
};

/// Two graphs whose node labels cannot be matched up.
class AlignmentError : public std::runtime_error {
public:
    explicit AlignmentError(const std::string& what) : std::runtime_error(what) {}
};

class ElicitationError : public std::runtime_error {
public:
    ElicitationError(const std::string& what, std::string failing_pair)
        : std::runtime_error(what), pair_(std::move(failing_pair)) {}

    const std::string& failing_pair() const noexcept { return pair_; }

private:
    std::string pair_;
};

}  // namespace pgdag
