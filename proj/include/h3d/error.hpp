#pragma once

#include <stdexcept>
#include <string>

namespace h3d {

/// Base class for all library failures that are not plain precondition violations.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Microimage lattice does not fit the sensor raster.
class LayoutError : public Error {
public:
    using Error::Error;
};

/// Lattice estimation found no usable periodicity.
class EstimationError : public Error {
public:
    using Error::Error;
};

/// Malformed or unreadable input file.
class InputError : public Error {
public:
    using Error::Error;
};

}  // namespace h3d
