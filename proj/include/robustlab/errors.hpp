#pragma once

#include <stdexcept>
#include <string>

namespace robustlab {

// Error taxonomy. The CLI maps these onto exit codes:
// usage/argument -> 2, data -> 3, numerical -> 4.
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ArgumentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace robustlab
