// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace compactnet {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Extents that do not agree with an operation's shape law.
class ShapeError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Malformed or truncated file contents.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Non-finite loss during training.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// Caller-independent invariant violation (e.g. a cache built for a different spec).
class InternalError : public Error {
public:
    using Error::Error;
};

} // namespace compactnet
