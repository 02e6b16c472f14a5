#pragma once

#include <stdexcept>
#include <string>

namespace dcc {

/// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// model
struct LengthMismatch : Error {
    using Error::Error;
};
struct NonPositiveValue : Error {
    using Error::Error;
};
struct PopularityNotNormalized : Error {
    using Error::Error;
};

// combinatorics
struct TooManyUsers : Error {
    using Error::Error;
};
struct EmptyActiveSet : Error {
    using Error::Error;
};
struct OutOfRange : Error {
    using Error::Error;
};

// rate
struct EmptySubset : Error {
    using Error::Error;
};
struct EnumerationTooLarge : Error {
    using Error::Error;
};
struct TooManyPermutations : Error {
    using Error::Error;
};

// gp
struct ProblemTooLarge : Error {
    using Error::Error;
};
struct NonPositiveAnchor : Error {
    using Error::Error;
};
struct Infeasible : Error {
    using Error::Error;
};
struct MaxIterations : Error {
    using Error::Error;
};
struct NumericalBreakdown : Error {
    using Error::Error;
};
struct NonMonotoneTrace : Error {
    using Error::Error;
};
struct NotStandardGP : Error {
    using Error::Error;
};

// strategies
struct NonuniformSizes : Error {
    using Error::Error;
};

// experiment
struct ConfigError : Error {
    using Error::Error;
};
struct NeedTwoSchemes : Error {
    using Error::Error;
};
struct CsvError : Error {
    using Error::Error;
};

}  // namespace dcc
