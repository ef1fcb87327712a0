// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

namespace wmprobe {

/// Parses a whole JSON file; Io on open failure, SchemaError on bad syntax.
nlohmann::json read_json_file(const std::filesystem::path& path);

/// Writes `j` (2-space indent, trailing newline) via a temp file + rename.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

/// Writes text via a temp file + rename.
void write_text_file(const std::filesystem::path& path, const std::string& text);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace wmprobe
