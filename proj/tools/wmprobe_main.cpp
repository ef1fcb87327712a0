// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>
#include <httplib.h>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <memory>
#include <mutex>

#include "wmprobe/chat_backend.hpp"
#include "wmprobe/datastore.hpp"
#include "wmprobe/decomposition.hpp"
#include "wmprobe/error.hpp"
#include "wmprobe/json_file.hpp"
#include "wmprobe/pipeline.hpp"
#include "wmprobe/report.hpp"
#include "wmprobe/synthetic.hpp"

#ifndef WMPROBE_DEFAULT_SUITE
#define WMPROBE_DEFAULT_SUITE "data/tasks.json"
#endif

namespace {

namespace fs = std::filesystem;
using namespace wmprobe;

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitVerify = 3;

struct BackendFlags {
    std::string kind = "live";
    std::string fixture;
    std::string record;
    double rps = 0.0;
    bool send_seed = false;
    // synthetic model
    std::vector<double> mu;
    double sigma_a = 1.0;
    double sigma_e = 1.0;
    std::uint64_t synthetic_seed = 0;
    double none_probability = 0.0;

    void add_to(CLI::App* app, bool synthetic) {
        app->add_option("--backend", kind, "live | replay" + std::string(synthetic ? " | synthetic" : ""))
            ->check(synthetic ? CLI::IsMember({"live", "replay", "synthetic"}) : CLI::IsMember({"live", "replay"}));
        app->add_option("--fixture", fixture, "replay fixture (replay backend)");
        app->add_option("--record", record, "save every exchange to this replay fixture");
        app->add_option("--rps", rps, "request-per-second cap for the live backend");
        app->add_flag("--send-seed", send_seed, "forward the attempt index as the request seed");
        if (!synthetic) return;
        app->add_option("--mu", mu, "synthetic intent means")->delimiter(',');
        app->add_option("--sigma-a", sigma_a, "synthetic prompt-effect sd");
        app->add_option("--sigma-e", sigma_e, "synthetic noise sd");
        app->add_option("--synthetic-seed", synthetic_seed, "synthetic model seed");
        app->add_option("--none-probability", none_probability, "synthetic rate of answers without a number");
    }

    // Flag combinations that parse but cannot run; checked before any file is touched.
    void check() const {
        if (kind == "replay" && fixture.empty()) throw CLI::ValidationError("--fixture", "required with --backend replay");
    }
};

// Owns whichever backend the flags select, plus an optional recorder.
struct BackendHolder {
    std::unique_ptr<ChatBackend> base;
    std::unique_ptr<RecordingBackend> recorder;
    std::string record_path;

    ChatBackend& get() { return recorder ? static_cast<ChatBackend&>(*recorder) : *base; }
    void finish() {
        if (recorder) recorder->save(record_path);
    }
};

BackendHolder make_backend(const BackendFlags& f, std::unique_ptr<ChatBackend> synthetic = nullptr) {
    BackendHolder h;
    if (f.kind == "replay") {
        if (f.fixture.empty()) throw CLI::ValidationError("--fixture", "required with --backend replay");
        h.base = std::make_unique<ReplayBackend>(ReplayBackend::load(f.fixture));
    } else if (f.kind == "synthetic") {
        h.base = std::move(synthetic);
    } else {
        auto cfg = LiveConfig::from_env();
        cfg.max_requests_per_second = f.rps;
        cfg.send_seed = f.send_seed;
        h.base = std::make_unique<LiveBackend>(cfg);
    }
    if (!f.record.empty()) {
        h.recorder = std::make_unique<RecordingBackend>(*h.base);
        h.record_path = f.record;
    }
    return h;
}

synth::SyntheticSpec synthetic_spec(const BackendFlags& f) {
    synth::SyntheticSpec s;
    s.intent_means = f.mu;
    s.prompt_effect_sd = f.sigma_a;
    s.noise_sd = f.sigma_e;
    s.seed = f.synthetic_seed;
    return s;
}

std::unique_ptr<synth::SyntheticRouter> synthetic_router(const BackendFlags& f, const store::TaskSuite& suite,
                                                         const pipeline::VariantMap& variants) {
    if (f.mu.size() < 2) throw CLI::ValidationError("--mu", "synthetic backend needs at least two intent means");
    auto router = std::make_unique<synth::SyntheticRouter>();
    synth::FormatterConfig fmt;
    fmt.none_probability = f.none_probability;
    for (const auto& [task_id, vs] : variants) {
        collect::CollectionPlan plan;
        plan.task = suite.find(task_id);
        plan.variants = vs;
        plan.n_intents = f.mu.size();
        auto spec = synthetic_spec(f);
        spec.seed = derive_seed(f.synthetic_seed, {hash_string(task_id)});
        router->add(synth::SyntheticBackend(spec, plan, fmt));
    }
    return router;
}

pipeline::VariantMap select_tasks(pipeline::VariantMap all, const std::vector<std::string>& tasks) {
    if (tasks.empty()) return all;
    pipeline::VariantMap out;
    for (const auto& t : tasks) {
        auto it = all.find(t);
        if (it == all.end()) throw Error(Errc::InvalidArgument, "no variants for task '" + t + "'");
        out.insert(*it);
    }
    return out;
}

int print_checks(const std::vector<pipeline::Check>& checks) {
    bool ok = true;
    for (const auto& c : checks) {
        std::printf("%s  %s  (%s)\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
        ok = ok && c.passed;
    }
    return ok ? 0 : kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"wmprobe: intent/articulation/uncertainty decomposition of LLM answers"};
    app.require_subcommand(1);
    std::string suite_path = WMPROBE_DEFAULT_SUITE;
    app.add_option("--suite", suite_path, "task suite JSON")->capture_default_str();

    // gen-prompts
    auto* gen = app.add_subcommand("gen-prompts", "generate and select intent-equivalent prompt variants");
    std::string gen_task, gen_out, gen_embedder = "trigram", gen_embed_model = "text-embedding-3-small";
    pipeline::VariantSetOptions vs_opts;
    bool gen_append = false;
    BackendFlags gen_backend;
    gen->add_option("--task", gen_task, "task id")->required();
    gen->add_option("--n", vs_opts.n, "verified candidates to generate")->capture_default_str();
    gen->add_option("--k", vs_opts.k, "candidates kept by diversity selection")->capture_default_str();
    gen->add_option("--seed", vs_opts.seed, "language-chain seed")->capture_default_str();
    gen->add_flag("--survey", vs_opts.survey, "survey-scenario generation instead of back-translation");
    gen->add_option("--translator-model", vs_opts.generation.translator_model)->capture_default_str();
    gen->add_option("--judge-model", vs_opts.generation.judge_model)->capture_default_str();
    gen->add_option("--max-in-flight", vs_opts.generation.max_in_flight)->capture_default_str();
    gen->add_option("--embedder", gen_embedder, "trigram | live")->check(CLI::IsMember({"trigram", "live"}));
    gen->add_option("--embedding-model", gen_embed_model)->capture_default_str();
    gen->add_option("--out", gen_out, "variants JSONL")->required();
    gen->add_flag("--append", gen_append, "append to --out instead of replacing it");
    gen_backend.add_to(gen, false);

    // collect
    auto* col = app.add_subcommand("collect", "elicit answers for every (intent, variant) cell");
    std::string col_run, col_variants;
    std::vector<std::string> col_tasks;
    pipeline::CollectOptions col_opts;
    col_opts.run_id.clear();
    BackendFlags col_backend;
    col->add_option("--run", col_run, "run directory")->required();
    col->add_option("--run-id", col_opts.run_id, "run id (default: directory name)");
    col->add_option("--model", col_opts.model_id, "model id")->required();
    col->add_option("--variants", col_variants, "variants JSONL (default: the run's variants.jsonl)");
    col->add_option("--tasks", col_tasks, "task ids (default: every task in the variants file)")->delimiter(',');
    col->add_option("--responses", col_opts.responses_per_cell, "retained answers per cell")->capture_default_str();
    col->add_option("--max-attempts", col_opts.max_attempts_per_cell, "attempt budget per cell")->capture_default_str();
    col->add_option("--intents", col_opts.n_intents, "use the first N intent values (0 = all)");
    col->add_option("--temperature", col_opts.temperature)->capture_default_str();
    col->add_option("--max-tokens", col_opts.max_tokens)->capture_default_str();
    col->add_option("--max-in-flight", col_opts.max_in_flight)->capture_default_str();
    col->add_option("--seed", col_opts.seed, "recorded in the manifest");
    col->add_option("--extractor-model", col_opts.extractor.model_id)->capture_default_str();
    col_backend.add_to(col, true);

    // extract
    auto* ext = app.add_subcommand("extract", "re-run numeric extraction over a run's raw answers");
    std::string ext_run;
    extract::ExtractorConfig ext_cfg;
    BackendFlags ext_backend;
    ext->add_option("--run", ext_run, "run directory")->required();
    ext->add_option("--extractor-model", ext_cfg.model_id)->capture_default_str();
    ext_backend.add_to(ext, true);

    // decompose
    auto* dec = app.add_subcommand("decompose", "variance decomposition of a run -> results.json");
    std::string dec_run, dec_out;
    std::size_t dec_boot = 0;
    stats::BootstrapOptions boot;
    bool dec_partial = false;
    dec->add_option("--run", dec_run, "run directory")->required();
    dec->add_option("--bootstrap", dec_boot, "bootstrap replicates (0 = none)")->capture_default_str();
    dec->add_option("--level", boot.level, "interval level")->capture_default_str();
    dec->add_option("--seed", boot.seed, "bootstrap seed")->capture_default_str();
    dec->add_option("--threads", boot.threads, "bootstrap threads")->capture_default_str();
    dec->add_option("--out", dec_out, "output path (default: <run>/results.json)");
    dec->add_flag("--allow-partial", dec_partial, "decompose an incomplete run");

    // report
    auto* rep = app.add_subcommand("report", "tables and charts from results files");
    std::vector<std::string> rep_results, rep_runs;
    std::string rep_format = "text", rep_out;
    rep->add_option("--results", rep_results, "results.json files (one per model)")->required();
    rep->add_option("--run", rep_runs, "run directories supplying raw values for density charts");
    rep->add_option("--format", rep_format, "text | csv | all")->check(CLI::IsMember({"text", "csv", "all"}));
    rep->add_option("--out", rep_out, "output directory (required for --format all)");

    // simulate
    auto* sim = app.add_subcommand("simulate", "synthetic datasets with known shares, or a synthetic model server");
    synth::SyntheticSpec sim_spec;
    std::size_t sim_prompts = 50, sim_responses = 50;
    std::string sim_out, sim_noise = "gaussian";
    bool sim_check = false, sim_serve = false;
    double sim_tol = 0.03;
    std::string serve_host = "127.0.0.1", serve_variants;
    int serve_port = 8089;
    BackendFlags sim_flags;
    sim->add_option("--mu", sim_spec.intent_means, "intent means")->delimiter(',')->required();
    sim->add_option("--sigma-a", sim_spec.prompt_effect_sd, "prompt-effect sd")->required();
    sim->add_option("--sigma-e", sim_spec.noise_sd, "noise sd")->required();
    sim->add_option("--seed", sim_spec.seed)->capture_default_str();
    sim->add_option("--noise", sim_noise, "gaussian | laplace")->check(CLI::IsMember({"gaussian", "laplace"}));
    sim->add_option("--prompts", sim_prompts)->capture_default_str();
    sim->add_option("--responses", sim_responses)->capture_default_str();
    sim->add_option("--out", sim_out, "write the dataset JSON here");
    sim->add_flag("--check", sim_check, "compare estimated and true shares");
    sim->add_option("--tolerance", sim_tol, "--check tolerance")->capture_default_str();
    sim->add_flag("--serve", sim_serve, "serve an OpenAI-compatible synthetic model");
    sim->add_option("--variants", serve_variants, "variants JSONL for --serve");
    sim->add_option("--host", serve_host)->capture_default_str();
    sim->add_option("--port", serve_port)->capture_default_str();
    sim->add_option("--none-probability", sim_flags.none_probability)->capture_default_str();

    // verify
    auto* ver = app.add_subcommand("verify", "run the invariant suite over a run or dataset");
    std::string ver_run, ver_dataset;
    ver->add_option("--run", ver_run, "run directory");
    ver->add_option("--dataset", ver_dataset, "dataset JSON");
    ver->require_option(1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        (void)app.exit(e);
        std::cerr << "\n" << app.help();
        return kExitUsage;
    }

    try {
        auto suite = [&] { return store::load_suite(suite_path); };

        if (*gen) {
            gen_backend.check();
            const auto s = suite();
            const auto& task = s.find(gen_task);
            auto backend = make_backend(gen_backend);
            std::unique_ptr<promptgen::Embedder> embedder;
            if (gen_embedder == "live")
                embedder = std::make_unique<promptgen::LiveEmbedder>(LiveConfig::from_env(), gen_embed_model);
            else
                embedder = std::make_unique<promptgen::TrigramEmbedder>();
            std::vector<PromptVariant> variants;
            try {
                variants = pipeline::build_variant_set(task, vs_opts, backend.get(), backend.get(), *embedder);
            } catch (...) {
                backend.finish();
                throw;
            }
            backend.finish();
            store::save_variants(gen_out, task.task_id, variants, gen_append);
            std::printf("wrote %zu variants for %s to %s\n", variants.size(), task.task_id.c_str(), gen_out.c_str());
            return 0;
        }

        if (*col) {
            col_backend.check();
            const auto s = suite();
            if (col_opts.run_id.empty()) col_opts.run_id = fs::path(col_run).filename().string();
            const fs::path vpath = col_variants.empty() ? fs::path(col_run) / store::kVariantsFile : fs::path(col_variants);
            const auto variants = select_tasks(store::load_variants(vpath), col_tasks);
            std::unique_ptr<ChatBackend> synthetic;
            if (col_backend.kind == "synthetic") {
                synthetic = synthetic_router(col_backend, s, variants);
                if (col_opts.n_intents == 0) col_opts.n_intents = col_backend.mu.size();
            }
            auto backend = make_backend(col_backend, std::move(synthetic));
            col_opts.backend_kind = col_backend.kind;
            pipeline::CollectSummary summary;
            try {
                summary = pipeline::collect_run(col_run, s, variants, col_opts, backend.get(), backend.get());
            } catch (...) {
                backend.finish();
                throw;
            }
            backend.finish();
            for (const auto& f : summary.failures)
                std::fprintf(stderr, "cell failed: %s intent %zu variant %s: %s\n", f.task_id.c_str(),
                             f.failure.intent_index, f.failure.variant_id.c_str(), f.failure.message.c_str());
            for (const auto& [task, c] : summary.manifest.counts)
                std::printf("%s: %zu/%zu cells full, %zu retained, %zu discarded\n", task.c_str(), c.complete_cells,
                            c.planned_cells, c.retained, c.discarded);
            std::printf("status: %s\n", std::string(store::to_string(summary.manifest.status)).c_str());
            return summary.manifest.status == store::RunStatus::Complete ? 0 : kExitFailure;
        }

        if (*ext) {
            ext_backend.check();
            const auto s = suite();
            std::unique_ptr<ChatBackend> synthetic;
            if (ext_backend.kind == "synthetic") {
                // Only the extraction half of the synthetic model is needed here.
                auto variants = store::load_variants(fs::path(ext_run) / store::kVariantsFile);
                if (ext_backend.mu.empty()) ext_backend.mu = {0.0, 1.0};
                synthetic = synthetic_router(ext_backend, s, variants);
            }
            auto backend = make_backend(ext_backend, std::move(synthetic));
            const auto changed = pipeline::reextract_run(ext_run, s, backend.get(), ext_cfg);
            backend.finish();
            std::printf("re-extracted; %zu records changed\n", changed);
            return 0;
        }

        if (*dec) {
            const auto s = suite();
            std::optional<stats::BootstrapOptions> b;
            if (dec_boot > 0) {
                boot.replicates = dec_boot;
                b = boot;
            }
            const auto results = pipeline::decompose_run(dec_run, s, b, dec_partial);
            const fs::path out = dec_out.empty() ? fs::path(dec_run) / store::kResultsFile : fs::path(dec_out);
            store::save_results(out, results);
            const RunResults one[] = {results};
            std::fputs(report::render_table(one).c_str(), stdout);
            return 0;
        }

        if (*rep) {
            std::vector<RunResults> runs;
            for (const auto& p : rep_results) runs.push_back(store::load_results(p));
            if (rep_format == "text") {
                std::fputs(report::render_table(runs).c_str(), stdout);
                return 0;
            }
            if (rep_format == "csv") {
                std::fputs(report::render_csv(runs).c_str(), stdout);
                return 0;
            }
            if (rep_out.empty()) throw CLI::ValidationError("--out", "required with --format all");
            std::map<std::string, NestedDataset> datasets;
            if (!rep_runs.empty()) datasets = pipeline::run_datasets(rep_runs.front());
            for (const auto& p : report::write_report(rep_out, runs, datasets)) std::printf("wrote %s\n", p.c_str());
            return 0;
        }

        if (*sim) {
            sim_spec.noise = sim_noise == "laplace" ? synth::NoiseKind::Laplace : synth::NoiseKind::Gaussian;
            if (sim_serve) {
                if (serve_variants.empty()) throw CLI::ValidationError("--variants", "required with --serve");
                const auto s = suite();
                sim_flags.mu = sim_spec.intent_means;
                sim_flags.sigma_a = sim_spec.prompt_effect_sd;
                sim_flags.sigma_e = sim_spec.noise_sd;
                sim_flags.synthetic_seed = sim_spec.seed;
                auto router = synthetic_router(sim_flags, s, store::load_variants(serve_variants));
                std::mutex mu;
                std::map<std::string, std::int64_t> counters;
                httplib::Server server;
                auto handler = [&](const httplib::Request& req, httplib::Response& res) {
                    try {
                        const auto body = nlohmann::json::parse(req.body);
                        std::lock_guard lock(mu);
                        res.set_content(pipeline::serve_chat_request(*router, body, counters).dump(), "application/json");
                    } catch (const std::exception& e) {
                        res.status = 400;
                        res.set_content(nlohmann::json{{"error", {{"message", e.what()}}}}.dump(), "application/json");
                    }
                };
                server.Post("/chat/completions", handler);
                server.Post("/v1/chat/completions", handler);
                std::printf("serving synthetic model on http://%s:%d/v1\n", serve_host.c_str(), serve_port);
                std::fflush(stdout);
                return server.listen(serve_host, serve_port) ? 0 : kExitFailure;
            }
            const auto simulation = synth::simulate_with_effects(sim_spec, sim_prompts, sim_responses);
            if (!sim_out.empty()) store::save_dataset_file(sim_out, simulation.dataset);
            const auto est = stats::decompose_variance(simulation.dataset);
            std::printf("estimated  ps=%.4f as=%.4f mu=%.4f\n", est.ps, est.as_share, est.mu);
            if (!sim_check) return 0;
            const auto truth = synth::true_shares(sim_spec);
            std::printf("true       ps=%.4f as=%.4f mu=%.4f\n", truth.ps, truth.as_share, truth.mu);
            const double gap = std::max({std::abs(est.ps - truth.ps), std::abs(est.as_share - truth.as_share),
                                         std::abs(est.mu - truth.mu)});
            const bool pass = gap <= sim_tol;
            std::printf("%s max |estimated - true| = %.4f (tolerance %.3f)\n", pass ? "PASS" : "FAIL", gap, sim_tol);
            return pass ? 0 : kExitVerify;
        }

        if (*ver) {
            if (!ver_run.empty()) return print_checks(pipeline::verify_run(ver_run));
            return print_checks(pipeline::verify_dataset(store::load_dataset_file(ver_dataset), ver_dataset));
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        // what() already leads with the error category
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    } catch (const std::exception& e) {
        std::cerr << "error[internal]: " << e.what() << "\n";
        return kExitFailure;
    }
    return 0;
}
