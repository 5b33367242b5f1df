#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hmtl {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file; carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class HierarchyError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// NaN or infinity showed up where a finite number was required.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace hmtl
