#pragma once

#include <stdexcept>
#include <string>

namespace snrsel {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Caller violated a documented precondition (bad rank, empty input, ...).
class PreconditionError : public Error {
public:
    explicit PreconditionError(const std::string& what) : Error(what) {}
};

// Malformed file or config; the message names the offending location.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& what) : Error(what) {}
};

// A numeric kernel failed (factorization, non-SPD input, divergence).
class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(what) {}
};

// An internal invariant broke; indicates a bug, not a user mistake.
class InternalError : public Error {
public:
    explicit InternalError(const std::string& what) : Error(what) {}
};

} // namespace snrsel
