// Copyright 2026 The shopstage Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace shopstage {

enum class ErrorCode {
    MalformedHeader,
    BadValue,
    DuplicateKey,
    MissingColumn,
    ShapeMismatch,
    EmptyStages,
    NotFitted,
    InsufficientRows,
    EmptyInput,
    EmptyHitSequence,
    StaleTrace,
    InvalidConfig,
    DegenerateSplit,
    NonFiniteLoss,
    MissingParams,
    EmptyPopulation,
    NoTargets,
    BadFormat,
    IoError,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& msg)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + msg), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Parse failure pinned to a 1-based data line and a column name.
class BadValueError : public Error {
public:
    BadValueError(std::size_t line, std::string column, const std::string& detail)
        : Error(ErrorCode::BadValue,
                "line " + std::to_string(line) + ", column '" + column + "': " + detail),
          line_(line),
          column_(std::move(column)) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::string column_;
};

inline std::string_view error_code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::BadValue: return "BadValue";
    case ErrorCode::DuplicateKey: return "DuplicateKey";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyStages: return "EmptyStages";
    case ErrorCode::NotFitted: return "NotFitted";
    case ErrorCode::InsufficientRows: return "InsufficientRows";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::EmptyHitSequence: return "EmptyHitSequence";
    case ErrorCode::StaleTrace: return "StaleTrace";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::DegenerateSplit: return "DegenerateSplit";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::MissingParams: return "MissingParams";
    case ErrorCode::EmptyPopulation: return "EmptyPopulation";
    case ErrorCode::NoTargets: return "NoTargets";
    case ErrorCode::BadFormat: return "BadFormat";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

} // namespace shopstage
