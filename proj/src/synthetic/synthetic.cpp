// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#include "wmprobe/synthetic.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "wmprobe/error.hpp"
#include "wmprobe/extractor.hpp"
#include "wmprobe/rng.hpp"

namespace wmprobe::synth {
namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kEffectStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
constexpr std::uint64_t kAnswerStream = 3;
constexpr std::uint64_t kLabelStream = 4;

constexpr std::string_view kNoAnswer = "It's hard to say without more details about your situation.";
constexpr std::string_view kAboutPrefix = "It would likely be about ";
constexpr std::string_view kRangePrefix = "Somewhere in the range ";

double population_variance(const std::vector<double>& xs, const std::vector<double>& weights) {
    double wsum = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        wsum += weights[i];
        mean += weights[i] * xs[i];
    }
    mean /= wsum;
    double var = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) var += weights[i] * (xs[i] - mean) * (xs[i] - mean);
    return var / wsum;
}

double draw_noise(Rng& rng, const SyntheticSpec& spec) {
    if (spec.noise_sd == 0.0) return 0.0;
    if (spec.noise == NoiseKind::Gaussian) return rng.normal(0.0, spec.noise_sd);
    // Laplace with scale b has variance 2 b^2.
    const double b = spec.noise_sd / std::sqrt(2.0);
    double u;
    do {
        u = rng.uniform01() - 0.5;
    } while (u == -0.5);
    return -b * (u < 0 ? -1.0 : 1.0) * std::log(1.0 - 2.0 * std::abs(u));
}

double prompt_effect(const SyntheticSpec& spec, std::size_t i, std::size_t p) {
    if (spec.prompt_effect_sd == 0.0) return 0.0;
    Rng rng(derive_seed(spec.seed, {kEffectStream, i, p}));
    return rng.normal(0.0, spec.prompt_effect_sd);
}

double entropy_bits(const std::vector<double>& probs) {
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0) h -= p * std::log2(p);
    return h;
}

std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

}  // namespace

void SyntheticSpec::validate() const {
    if (intent_means.size() < 2) throw Error(Errc::InvalidArgument, "need at least 2 intent means");
    for (double m : intent_means)
        if (!std::isfinite(m)) throw Error(Errc::InvalidArgument, "intent means must be finite");
    if (!(prompt_effect_sd >= 0.0) || !std::isfinite(prompt_effect_sd) || !(noise_sd >= 0.0) || !std::isfinite(noise_sd))
        throw Error(Errc::InvalidArgument, "standard deviations must be finite and >= 0");
}

Shares true_shares(const SyntheticSpec& spec) {
    spec.validate();
    const double var_mu = population_variance(spec.intent_means, std::vector<double>(spec.intent_means.size(), 1.0));
    const double a = spec.prompt_effect_sd * spec.prompt_effect_sd;
    const double e = spec.noise_sd * spec.noise_sd;
    const double total = var_mu + a + e;
    if (!(total > 0.0)) throw Error(Errc::ZeroDispersion, "generative model has zero variance");
    Shares s;
    s.ps = var_mu / total;
    s.as_share = a / total;
    s.mu = 1.0 - s.ps - s.as_share;
    if (e == 0.0) s.mu = 0.0;
    return s;
}

Shares conditional_true_shares(const SyntheticSpec& spec, const std::vector<std::vector<double>>& effects) {
    spec.validate();
    if (effects.size() != spec.intent_means.size())
        throw Error(Errc::InvalidArgument, "effects must have one row per intent");
    std::vector<double> intent_means, weights;
    double within = 0.0, total_weight = 0.0;
    for (std::size_t i = 0; i < effects.size(); ++i) {
        if (effects[i].empty()) throw Error(Errc::InvalidArgument, "intent without prompts");
        std::vector<double> cells;
        for (double b : effects[i]) cells.push_back(spec.intent_means[i] + b);
        const std::vector<double> ones(cells.size(), 1.0);
        double m = 0.0;
        for (double c : cells) m += c;
        intent_means.push_back(m / static_cast<double>(cells.size()));
        const double w = static_cast<double>(cells.size());
        weights.push_back(w);
        within += w * population_variance(cells, ones);
        total_weight += w;
    }
    const double ps = population_variance(intent_means, weights);
    const double as = within / total_weight;
    const double mu = spec.noise_sd * spec.noise_sd;
    const double total = ps + as + mu;
    if (!(total > 0.0)) throw Error(Errc::ZeroDispersion, "conditional model has zero variance");
    return {ps / total, as / total, mu / total};
}

Simulation simulate_with_effects(const SyntheticSpec& spec, std::size_t n_prompts, std::size_t n_responses) {
    spec.validate();
    if (n_prompts < 1 || n_responses < 1) throw Error(Errc::InvalidArgument, "counts must be >= 1");
    Simulation sim;
    sim.dataset.mode = DatasetMode::Numeric;
    for (std::size_t i = 0; i < spec.intent_means.size(); ++i) {
        IntentCell intent;
        intent.intent_id = std::to_string(i);
        std::vector<double> row;
        for (std::size_t p = 0; p < n_prompts; ++p) {
            const double beta = prompt_effect(spec, i, p);
            row.push_back(beta);
            Rng rng(derive_seed(spec.seed, {kNoiseStream, i, p}));
            PromptCell cell;
            char id[32];
            std::snprintf(id, sizeof id, "p%03zu", p);
            cell.prompt_id = id;
            cell.values.reserve(n_responses);
            for (std::size_t k = 0; k < n_responses; ++k)
                cell.values.push_back(spec.intent_means[i] + beta + draw_noise(rng, spec));
            intent.prompts.push_back(std::move(cell));
        }
        sim.effects.push_back(std::move(row));
        sim.dataset.intents.push_back(std::move(intent));
    }
    return sim;
}

NestedDataset simulate(const SyntheticSpec& spec, std::size_t n_prompts, std::size_t n_responses) {
    return simulate_with_effects(spec, n_prompts, n_responses).dataset;
}

void CategoricalSpec::validate() const {
    if (labels.size() < 2) throw Error(Errc::InvalidArgument, "need at least 2 labels");
    if (tables.size() < 2) throw Error(Errc::InvalidArgument, "need at least 2 intents");
    for (const auto& intent : tables) {
        if (intent.empty()) throw Error(Errc::InvalidArgument, "intent without prompts");
        for (const auto& row : intent) {
            if (row.size() != labels.size()) throw Error(Errc::InvalidArgument, "emission row size mismatch");
            double s = 0.0;
            for (double p : row) {
                if (!(p >= 0.0)) throw Error(Errc::InvalidArgument, "negative probability");
                s += p;
            }
            if (std::abs(s - 1.0) > 1e-9) throw Error(Errc::InvalidArgument, "emission row does not sum to 1");
        }
    }
}

stats::EntropyDecomposition true_entropy_decomposition(const CategoricalSpec& spec) {
    spec.validate();
    const std::size_t L = spec.labels.size();
    const double p_intent = 1.0 / static_cast<double>(spec.tables.size());
    std::vector<double> marginal(L, 0.0);
    double h_given_intent = 0.0, h_given_cell = 0.0;
    for (const auto& intent : spec.tables) {
        const double p_prompt = 1.0 / static_cast<double>(intent.size());
        std::vector<double> intent_dist(L, 0.0);
        for (const auto& row : intent) {
            for (std::size_t l = 0; l < L; ++l) intent_dist[l] += p_prompt * row[l];
            h_given_cell += p_intent * p_prompt * entropy_bits(row);
        }
        for (std::size_t l = 0; l < L; ++l) marginal[l] += p_intent * intent_dist[l];
        h_given_intent += p_intent * entropy_bits(intent_dist);
    }
    stats::EntropyDecomposition r;
    r.total_entropy = entropy_bits(marginal);
    r.ps_info = r.total_entropy - h_given_intent;
    r.as_info = h_given_intent - h_given_cell;
    r.mu_entropy = h_given_cell;
    if (r.total_entropy > 0.0)
        r.normalized = {r.ps_info / r.total_entropy, r.as_info / r.total_entropy, r.mu_entropy / r.total_entropy};
    r.n_intents = spec.tables.size();
    return r;
}

NestedDataset simulate_categorical(const CategoricalSpec& spec, std::size_t n_responses) {
    spec.validate();
    NestedDataset d;
    d.mode = DatasetMode::Categorical;
    for (std::size_t i = 0; i < spec.tables.size(); ++i) {
        IntentCell intent;
        intent.intent_id = std::to_string(i);
        for (std::size_t p = 0; p < spec.tables[i].size(); ++p) {
            Rng rng(derive_seed(spec.seed, {kLabelStream, i, p}));
            PromptCell cell;
            char id[16];
            std::snprintf(id, sizeof id, "p%03zu", p);
            cell.prompt_id = id;
            const auto& row = spec.tables[i][p];
            for (std::size_t k = 0; k < n_responses; ++k) {
                const double u = rng.uniform01();
                double acc = 0.0;
                std::size_t pick = row.size() - 1;
                for (std::size_t l = 0; l < row.size(); ++l) {
                    acc += row[l];
                    if (u < acc) {
                        pick = l;
                        break;
                    }
                }
                cell.labels.push_back(spec.labels[pick]);
            }
            intent.prompts.push_back(std::move(cell));
        }
        d.intents.push_back(std::move(intent));
    }
    return d;
}

std::string format_number(double x) {
    char buf[512];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::fixed);
    if (ec != std::errc()) throw Error(Errc::InvalidArgument, "cannot format number");
    return std::string(buf, ptr);
}

SyntheticBackend::SyntheticBackend(SyntheticSpec spec, const collect::CollectionPlan& plan, FormatterConfig formatter)
    : spec_(std::move(spec)), formatter_(formatter) {
    spec_.validate();
    if (spec_.intent_means.size() != plan.intent_count())
        throw Error(Errc::InvalidArgument, "synthetic model has " + std::to_string(spec_.intent_means.size()) +
                                               " intent means but the plan uses " +
                                               std::to_string(plan.intent_count()) + " intents");
    for (std::size_t i = 0; i < plan.intent_count(); ++i) {
        std::vector<double> row;
        for (std::size_t p = 0; p < plan.variants.size(); ++p) {
            const std::string text = collect::render_prompt(plan.task, plan.variants[p], i);
            if (!prompt_index_.emplace(text, std::make_pair(i, p)).second)
                throw Error(Errc::InvalidArgument, "two cells render to the same prompt text");
            row.push_back(prompt_effect(spec_, i, p));
        }
        effects_.push_back(std::move(row));
    }
}

double SyntheticBackend::value_for(std::size_t intent_index, std::size_t variant_pos, std::int64_t seed_hint) const {
    Rng rng(derive_seed(spec_.seed, {kAnswerStream, intent_index, variant_pos, static_cast<std::uint64_t>(seed_hint)}));
    (void)rng.uniform01();  // format draw
    (void)rng.uniform01();  // none draw
    return spec_.intent_means[intent_index] + effects_[intent_index][variant_pos] + draw_noise(rng, spec_);
}

Completion SyntheticBackend::answer(std::size_t intent_index, std::size_t variant_pos, std::int64_t seed_hint) const {
    Rng rng(derive_seed(spec_.seed, {kAnswerStream, intent_index, variant_pos, static_cast<std::uint64_t>(seed_hint)}));
    const double format_u = rng.uniform01();
    const double none_u = rng.uniform01();
    const double value = spec_.intent_means[intent_index] + effects_[intent_index][variant_pos] + draw_noise(rng, spec_);
    if (none_u < formatter_.none_probability) return {std::string(kNoAnswer), "synthetic:none"};

    const double total = formatter_.plain_weight + formatter_.about_weight + formatter_.range_weight;
    const double pick = format_u * total;
    if (pick < formatter_.plain_weight) return {format_number(value), "synthetic:plain"};
    if (pick < formatter_.plain_weight + formatter_.about_weight)
        return {std::string(kAboutPrefix) + format_number(value) + ".", "synthetic:about"};
    const double w = formatter_.range_half_width;
    return {std::string(kRangePrefix) + format_number(value - w) + "-" + format_number(value + w) + ".",
            "synthetic:range"};
}

Completion SyntheticBackend::post_process(const std::string& user) const {
    static constexpr std::string_view kMarker = "Answer text:";
    std::string_view text(user);
    if (auto pos = text.rfind(kMarker); pos != std::string_view::npos) text = text.substr(pos + kMarker.size());
    text = trim(text);
    if (text == kNoAnswer) return {"None", "synthetic:post"};
    if (text.starts_with(kAboutPrefix) || text.starts_with(kRangePrefix)) {
        text.remove_prefix(text.starts_with(kAboutPrefix) ? kAboutPrefix.size() : kRangePrefix.size());
        if (text.ends_with('.')) text.remove_suffix(1);
    }
    return {std::string(text), "synthetic:post"};
}

Completion SyntheticBackend::complete(const ChatRequest& request) {
    if (request.system && *request.system == extract::kSystemPrompt) return post_process(request.user);
    auto it = prompt_index_.find(request.user);
    if (it == prompt_index_.end()) throw Error(Errc::BackendError, "synthetic backend does not know this prompt");
    return answer(it->second.first, it->second.second, request.seed_hint.value_or(0));
}

bool SyntheticBackend::handles(const ChatRequest& request) const {
    if (request.system && *request.system == extract::kSystemPrompt) return true;
    return prompt_index_.contains(request.user);
}

Completion SyntheticRouter::complete(const ChatRequest& request) {
    for (auto& b : backends_)
        if (b.handles(request)) return b.complete(request);
    throw Error(Errc::BackendError, "no synthetic backend knows this prompt");
}

SyntheticBackend as_backend(const SyntheticSpec& spec, const collect::CollectionPlan& plan, FormatterConfig formatter) {
    return SyntheticBackend(spec, plan, formatter);
}

}  // namespace wmprobe::synth
