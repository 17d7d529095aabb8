#pragma once

// Error taxonomy for the resdual core. Everything derives from std::runtime_error
// so callers can catch broadly; the C API maps each type to a status code.

#include <stdexcept>
#include <string>

namespace resdual {

// Shape/rank mismatch between operands (e.g. matmul inner extents differ).
struct dimension_error : std::runtime_error {
    explicit dimension_error(const std::string& what) : std::runtime_error(what) {}
};

// Index outside a tensor or stack extent.
struct bounds_error : std::runtime_error {
    explicit bounds_error(const std::string& what) : std::runtime_error(what) {}
};

// A single argument value is unusable (window size 0, negative step count, ...).
struct parameter_error : std::runtime_error {
    explicit parameter_error(const std::string& what) : std::runtime_error(what) {}
};

// A whole configuration is inconsistent (mixer window vs depth, bad partition, ...).
struct config_error : std::runtime_error {
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Data violates a documented invariant (non-convex aggregation row, non-finite value).
struct invariant_error : std::runtime_error {
    explicit invariant_error(const std::string& what) : std::runtime_error(what) {}
};

// API contract misuse (gradient of a non-scalar, reading a released handle, ...).
struct contract_error : std::runtime_error {
    explicit contract_error(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem/serialization failure (unwritable path, bad magic, truncated file).
struct io_error : std::runtime_error {
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace resdual
