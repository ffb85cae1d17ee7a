#pragma once

#include <stdexcept>
#include <string>

namespace guidecap {

// Error taxonomy. The CLI maps these onto exit codes: usage errors exit 1,
// data/config/parse errors exit 2, selfcheck failures exit 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid or inconsistent configuration values.
struct ConfigError : Error {
  using Error::Error;
};

// Shape or rank mismatch in a numeric operation.
struct DimensionError : Error {
  using Error::Error;
};

// Non-finite value produced by a numeric operation.
struct NumericError : Error {
  using Error::Error;
};

// Malformed input file; message carries file name and line number.
struct ParseError : Error {
  using Error::Error;
};

// Semantically invalid data (unknown ids, schema mismatch, bad labels).
struct DataError : Error {
  using Error::Error;
};

// API misuse (precondition violation detected at runtime).
struct ContractError : Error {
  using Error::Error;
};

// Dataset split construction failed (e.g. exclusion emptied the train set).
struct SplitError : Error {
  using Error::Error;
};

}  // namespace guidecap
