#pragma once

#include <stdexcept>
#include <string>

namespace netshift {

/// Base class for all library errors. The CLI maps the three families below
/// onto exit codes 2 (config), 3 (data) and 4 (numerical).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

/// No source unit falls in the requested covariate cell.
class EmptyCellError : public DataError {
public:
    using DataError::DataError;
};

class RankDeficientError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class InfeasibleError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class IndefiniteKernelError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

} // namespace netshift
