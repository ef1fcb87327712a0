// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wmprobe {

enum class Errc {
    InvalidArgument,
    InvalidDataset,
    ZeroDispersion,
    Undefined,
    BackendError,
    EmptyTranslation,
    UnparseableVerdict,
    GenerationBudgetExceeded,
    InsufficientCandidates,
    MissingPlaceholder,
    CellBudgetExceeded,
    SchemaError,
    DuplicateTaskId,
    CorruptLine,
    MixedRun,
    Io,
};

std::string_view to_string(Errc code) noexcept;

/// Single exception type for the library; `code()` carries the category so
/// callers (and the CLI exit path) can branch without RTTI.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

/// Raised by the JSONL reader; `line()` is 1-based.
class CorruptLineError : public Error {
public:
    CorruptLineError(std::size_t line, const std::string& detail)
        : Error(Errc::CorruptLine, "line " + std::to_string(line) + ": " + detail), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace wmprobe
