// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "wmprobe/bootstrap.hpp"
#include "wmprobe/datastore.hpp"
#include "wmprobe/pipeline.hpp"

// Parameters of the bundled replay fixture run, shared by the fixture
// generator, the tests and the acceptance suite.
namespace wmprobe::replay {

inline constexpr const char* kFixtureFile = "replay.json";

/// 2 intents x 3 variants x 5 responses per cell.
pipeline::CollectOptions fixture_plan();

stats::BootstrapOptions fixture_bootstrap();

/// Replays the fixture in `fixture_dir` into a fresh run directory `out_dir`.
store::RunManifest run_fixture(const std::filesystem::path& fixture_dir, const store::TaskSuite& suite,
                               const std::filesystem::path& out_dir);

}  // namespace wmprobe::replay
