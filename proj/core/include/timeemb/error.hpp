#pragma once

#include <stdexcept>
#include <string>

namespace timeemb {

// Error hierarchy shared by all modules. The CLI maps ConfigError and
// DataError to exit code 2.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class InvariantError : public Error {
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

class FormatError : public DataError {
public:
    using DataError::DataError;
};

class ParseError : public DataError {
public:
    using DataError::DataError;
};

// A differentiation contract was broken (e.g. backward from a non-scalar).
class ContractError : public Error {
public:
    using Error::Error;
};

// Non-finite value produced by a differentiable primitive.
class NumericError : public Error {
public:
    NumericError(std::string primitive, const std::string& what)
        : Error(what), primitive_(std::move(primitive)) {}

    const std::string& primitive() const noexcept { return primitive_; }

private:
    std::string primitive_;
};

} // namespace timeemb
