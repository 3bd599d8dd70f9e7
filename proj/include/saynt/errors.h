#pragma once

#include <stdexcept>
#include <string>

namespace saynt {

/// Base class of all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text (JSON syntax). Carries the byte offset reported by the parser.
class ParseError : public Error {
public:
    ParseError(std::string const& message, std::size_t offset) : Error(message), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// Well-formed input that does not follow the documented schema.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// A model or controller that violates a structural invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Incompatible combination of inputs, e.g. a reward objective on a model without rewards.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// An operation that is undefined for its arguments, e.g. a disabled action.
class ModelError : public Error {
public:
    using Error::Error;
};

}  // namespace saynt
