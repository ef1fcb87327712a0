// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "wmprobe/replay_plan.hpp"

#include "wmprobe/chat_backend.hpp"

namespace wmprobe::replay {

pipeline::CollectOptions fixture_plan() {
    pipeline::CollectOptions o;
    o.run_id = "replay_fixture";
    o.model_id = "synthetic/replay-model";
    o.backend_kind = "replay";
    o.seed = 20260101;
    o.n_intents = 2;
    o.responses_per_cell = 5;
    o.max_attempts_per_cell = 250;
    return o;
}

stats::BootstrapOptions fixture_bootstrap() {
    stats::BootstrapOptions b;
    b.replicates = 200;
    b.level = 0.95;
    b.seed = 7;
    return b;
}

store::RunManifest run_fixture(const std::filesystem::path& fixture_dir, const store::TaskSuite& suite,
                               const std::filesystem::path& out_dir) {
    std::filesystem::remove_all(out_dir);
    auto backend = ReplayBackend::load(fixture_dir / kFixtureFile);
    const auto variants = store::load_variants(fixture_dir / store::kVariantsFile);
    return pipeline::collect_run(out_dir, suite, variants, fixture_plan(), backend, backend).manifest;
}

}  // namespace wmprobe::replay
