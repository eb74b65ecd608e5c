#pragma once

#include <stdexcept>
#include <string>

namespace tagsim {

// Argument violates a documented precondition (out-of-bounds value, zero
// denominator, oversampling < 1, ...).
struct InvalidInput : std::runtime_error {
    explicit InvalidInput(const std::string& msg) : std::runtime_error(msg) {}
};

// Anchor geometry too degenerate to solve (collinear in 2D, coplanar in 3D).
struct GeometryError : std::runtime_error {
    explicit GeometryError(const std::string& msg) : std::runtime_error(msg) {}
};

// Fewer usable measurements/samples than the operation requires.
struct InsufficientData : std::runtime_error {
    explicit InsufficientData(const std::string& msg) : std::runtime_error(msg) {}
};

// File or record level parse failure; message names the offending line.
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Scenario configuration rejected at load (unknown key, missing section,
// missing file, value out of bounds).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A metric whose definition breaks down on the given input (e.g. zero
// measured-energy integral).
struct UndefinedMetric : std::runtime_error {
    explicit UndefinedMetric(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace tagsim
