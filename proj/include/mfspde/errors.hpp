#pragma once

#include <stdexcept>
#include <string>

namespace mfspde {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid inputs: degenerate domains, length mismatches, empty ensembles,
/// inadmissible controls.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Arguments outside a coefficient's domain (e.g. log of a nonpositive harvest).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Non-finite values, singular solves, positivity violations.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Configuration problems. Carries the offending field and, when known, the
/// 1-based line number in the config file.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& message, int line = 0)
        : Error(format(field, message, line)), field_(std::move(field)), line_(line) {}

    const std::string& field() const noexcept { return field_; }
    int line() const noexcept { return line_; }

private:
    static std::string format(const std::string& field, const std::string& message, int line) {
        std::string out = "config error";
        if (line > 0) out += " at line " + std::to_string(line);
        if (!field.empty()) out += " [" + field + "]";
        return out + ": " + message;
    }

    std::string field_;
    int line_;
};

}  // namespace mfspde
