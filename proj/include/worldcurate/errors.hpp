// Error taxonomy shared across the pipeline. The CLI maps these to exit
// codes: validation 1, I/O 2, internal invariant 3.
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace worldcurate {

// Bad input data or configuration.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed file content; carries the 1-based line number.
class ParseError : public ValidationError {
public:
    ParseError(const std::string& msg, std::size_t line)
        : ValidationError(msg + " (line " + std::to_string(line) + ")"), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// Filesystem or OS failure.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Broken internal invariant; a bug, not bad input.
class InternalError : public std::logic_error {
public:
    explicit InternalError(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace worldcurate
