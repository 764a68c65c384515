#pragma once

#include <stdexcept>
#include <string>

namespace gridvqa {

// Shape or extent disagreement between operands.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Unsupported hyper-parameter or option value.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Non-finite value where a finite one is required.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller violated an operation precondition.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Malformed input file or record.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Requested key (image id, question id, grid size) is not available.
class LookupError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

}  // namespace gridvqa
