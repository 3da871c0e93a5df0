/**
 * @file error.hpp
 * @brief Exception hierarchy shared by every polarcube module.
 *
 * Each exception carries a coarse category so frontends can map failures to
 * process exit codes without inspecting messages.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace polarcube {

enum class ErrorCategory { config, io, numerical };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

/// Invalid arguments, inconsistent dimensions, rejected configurations.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

/// Missing files, truncated containers, schema violations on load.
class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

/// Rank deficiency, undefined features, divergence.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorCategory::numerical, what) {}
};

} // namespace polarcube
