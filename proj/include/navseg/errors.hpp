#pragma once

#include <stdexcept>
#include <string>

namespace navseg {

// Shape/dimension disagreement between tensors or grids.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid configuration (JSON configs, group maps, head settings).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed data at runtime (labels out of range, mismatched files).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API misuse (tape consumed twice, iteration out of schedule range).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File I/O and format failures.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace navseg
