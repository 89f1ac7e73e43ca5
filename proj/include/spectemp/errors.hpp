#pragma once

#include <stdexcept>
#include <string>

namespace spectemp {

// Base for every error raised by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

// Out-of-range model or basis parameter (e.g. Gegenbauer alpha <= -1/2).
class ParameterError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class ParseError : public DataError {
public:
    ParseError(const std::string& what, std::size_t line)
        : DataError(what + " (line " + std::to_string(line) + ")"), reason_(what), line_(line) {}

    std::size_t line() const { return line_; }
    // Message without the line suffix.
    const std::string& reason() const { return reason_; }

private:
    std::string reason_;
    std::size_t line_;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

} // namespace spectemp
