// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wmprobe/chat_backend.hpp"
#include "wmprobe/collector.hpp"
#include "wmprobe/decomposition.hpp"
#include "wmprobe/nested_dataset.hpp"

namespace wmprobe::synth {

enum class NoiseKind { Gaussian, Laplace };

/// Additive generative model v = mu_i + beta_{i,p} + eps with
/// beta ~ N(0, prompt_effect_sd^2) drawn once per prompt and eps drawn per
/// response (Gaussian, or Laplace scaled to the same standard deviation).
struct SyntheticSpec {
    std::vector<double> intent_means;
    double prompt_effect_sd = 0.0;
    double noise_sd = 0.0;
    std::uint64_t seed = 0;
    NoiseKind noise = NoiseKind::Gaussian;

    void validate() const;
};

struct Shares {
    double ps = 0.0;
    double as_share = 0.0;
    double mu = 0.0;
};

/// Population shares of the generative model. Throws ZeroDispersion.
Shares true_shares(const SyntheticSpec& spec);

/// Shares of the model conditional on realised prompt effects, i.e. the
/// estimand of a within-cell bootstrap over a fixed prompt set with equal
/// cell sizes. effects[i][p] is beta_{i,p}.
Shares conditional_true_shares(const SyntheticSpec& spec, const std::vector<std::vector<double>>& effects);

struct Simulation {
    NestedDataset dataset;
    std::vector<std::vector<double>> effects;
};

Simulation simulate_with_effects(const SyntheticSpec& spec, std::size_t n_prompts, std::size_t n_responses);

/// Deterministic in spec.seed. Intent ids are "0".."k-1", prompt ids
/// "p000".."p{n-1}".
NestedDataset simulate(const SyntheticSpec& spec, std::size_t n_prompts, std::size_t n_responses);

/// Discrete emission model: intents and prompts uniform, labels drawn from
/// tables[i][p] (probabilities over `labels`).
struct CategoricalSpec {
    std::vector<std::string> labels;
    std::vector<std::vector<std::vector<double>>> tables;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Closed-form entropy decomposition of a CategoricalSpec, in bits.
stats::EntropyDecomposition true_entropy_decomposition(const CategoricalSpec& spec);

NestedDataset simulate_categorical(const CategoricalSpec& spec, std::size_t n_responses);

/// Text formats the synthetic backend cycles through.
struct FormatterConfig {
    double plain_weight = 1.0;     // "X"
    double about_weight = 1.0;     // "about X"
    double range_weight = 1.0;     // "A-B" with midpoint X
    double none_probability = 0.0; // answer with no usable number
    double range_half_width = 1.0;
};

/// Shortest round-trip decimal rendering in fixed notation (no exponent).
std::string format_number(double x);

/// Offline chat backend built on a SyntheticSpec.
///
/// Elicitation requests are matched against every rendered (intent, variant)
/// prompt of the plan; the drawn value depends only on (seed, intent,
/// variant position, seed_hint), so the backend is order-independent.
/// Extraction requests (extraction system prompt) are answered the way a
/// faithful post-processor would: the number, the "a-b" range, or "None".
class SyntheticBackend final : public ChatBackend {
public:
    SyntheticBackend(SyntheticSpec spec, const collect::CollectionPlan& plan, FormatterConfig formatter = {});

    Completion complete(const ChatRequest& request) override;
    std::string_view kind() const noexcept override { return "synthetic"; }

    /// True for extraction requests and for prompts of this backend's plan.
    bool handles(const ChatRequest& request) const;

    /// The value the backend draws for a cell attempt.
    double value_for(std::size_t intent_index, std::size_t variant_pos, std::int64_t seed_hint) const;
    const std::vector<std::vector<double>>& effects() const noexcept { return effects_; }

private:
    Completion answer(std::size_t intent_index, std::size_t variant_pos, std::int64_t seed_hint) const;
    Completion post_process(const std::string& user) const;

    SyntheticSpec spec_;
    FormatterConfig formatter_;
    std::map<std::string, std::pair<std::size_t, std::size_t>> prompt_index_;
    std::vector<std::vector<double>> effects_;
};

/// Dispatches each request to the first backend that handles it, so one
/// synthetic model can serve a run spanning several tasks.
class SyntheticRouter final : public ChatBackend {
public:
    void add(SyntheticBackend backend) { backends_.push_back(std::move(backend)); }
    Completion complete(const ChatRequest& request) override;
    std::string_view kind() const noexcept override { return "synthetic"; }
    std::size_t size() const noexcept { return backends_.size(); }

private:
    std::vector<SyntheticBackend> backends_;
};

/// Builds the backend from a spec and plan (spec.intent_means must match
/// plan.intent_count()).
SyntheticBackend as_backend(const SyntheticSpec& spec, const collect::CollectionPlan& plan,
                            FormatterConfig formatter = {});

}  // namespace wmprobe::synth
