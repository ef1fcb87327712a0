// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "wmprobe/error.hpp"

namespace wmprobe {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::InvalidDataset: return "InvalidDataset";
    case Errc::ZeroDispersion: return "ZeroDispersion";
    case Errc::Undefined: return "Undefined";
    case Errc::BackendError: return "BackendError";
    case Errc::EmptyTranslation: return "EmptyTranslation";
    case Errc::UnparseableVerdict: return "UnparseableVerdict";
    case Errc::GenerationBudgetExceeded: return "GenerationBudgetExceeded";
    case Errc::InsufficientCandidates: return "InsufficientCandidates";
    case Errc::MissingPlaceholder: return "MissingPlaceholder";
    case Errc::CellBudgetExceeded: return "CellBudgetExceeded";
    case Errc::SchemaError: return "SchemaError";
    case Errc::DuplicateTaskId: return "DuplicateTaskId";
    case Errc::CorruptLine: return "CorruptLine";
    case Errc::MixedRun: return "MixedRun";
    case Errc::Io: return "Io";
    }
    return "Unknown";
}

}  // namespace wmprobe
