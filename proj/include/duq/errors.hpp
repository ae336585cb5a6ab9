#pragma once

#include <stdexcept>

namespace duq {

// Base class for everything this library throws.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raster or point-set dimensions do not agree.
struct ShapeError : Error {
    using Error::Error;
};

// A value sits outside its mathematical domain (nonpositive sigma,
// nonpositive depth under a log, zero variance, non-finite coordinates).
struct DomainError : Error {
    using Error::Error;
};

// An operation received no usable data: empty sample set, no valid pixels,
// or fewer pixels than the method needs.
struct EmptyInputError : Error {
    using Error::Error;
};

// A caller-supplied parameter is out of range or inconsistent.
struct ParameterError : Error {
    using Error::Error;
};

// Malformed, truncated, or out-of-domain file content.
struct FormatError : Error {
    using Error::Error;
};

// Optimization produced a non-finite loss.
struct TrainingError : Error {
    using Error::Error;
};

// Geometry too thin to support the requested estimate.
struct DegenerateError : Error {
    using Error::Error;
};

}  // namespace duq
