#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lstmcov {

/// Malformed input file; carries the 1-based line number when known.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Invalid or inconsistent configuration (unknown dataset, C not divisible by d, ...).
class ConfigError : public std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Out-of-contract argument value.
class ArgumentError : public std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Tensor shapes that do not conform.
class DimensionError : public std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// NaN/Inf encountered where finite values are required.
class NumericError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A dataset that cannot serve the requested windows or splits.
class DatasetError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A results file lacking required columns.
class SchemaError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Caller violated an API precondition (e.g. passing an unscaled batch to a model).
class ContractError : public std::logic_error {
    using std::logic_error::logic_error;
};

} // namespace lstmcov
