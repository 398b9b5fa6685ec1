// Copyright (C) 2026 The tinyyolo Authors
//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tinyyolo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape or size disagreement between operands.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// NaN or Inf produced by a float operation.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent file contents (bad magic, truncated, digest mismatch).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Text parse failure with a 1-based source location.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line, std::size_t column = 0)
        : Error(format(what, line, column)), line_(line), column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    static std::string format(const std::string& what, std::size_t line, std::size_t column) {
        std::string s = "line " + std::to_string(line);
        if (column > 0) s += ", column " + std::to_string(column);
        return s + ": " + what;
    }

    std::size_t line_;
    std::size_t column_;
};

}  // namespace tinyyolo
