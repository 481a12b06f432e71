// SPDX-License-Identifier: Apache-2.0
//
// mdfce: dual-band massive MIMO channel extrapolation toolkit

#pragma once

#include <stdexcept>
#include <string>

namespace mdfce {

// Dimension mismatch between tensors/matrices. Message names both shapes.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A documented precondition of an operation was violated.
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Degenerate gating (e.g. a fully masked softmax row).
struct RoutingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite value where the contract requires finite arithmetic.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed file contents (bad magic, version, truncation).
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem-level failure (unreadable/unwritable path).
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace mdfce
