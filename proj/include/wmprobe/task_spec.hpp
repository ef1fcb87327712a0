// Copyright 2026 The wmprobe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wmprobe {

enum class Category { HealthNutrition, Logistics, PersonalFinance, SocialPlanning, TravelTransportation };

std::string_view to_string(Category c) noexcept;
/// Throws Error(SchemaError) for unknown names.
Category category_from_string(std::string_view name);

/// A placeholder substitution. `text` is the exact rendering used in prompts;
/// `is_number` only records how the value was written in the suite file.
struct IntentValue {
    std::string text;
    bool is_number = false;

    friend bool operator==(const IntentValue&, const IntentValue&) = default;
};

/// One evaluation task: a template with a single `{name}` placeholder and the
/// values that change the user's intent.
struct TaskSpec {
    std::string task_id;
    Category category = Category::HealthNutrition;
    std::string template_text;
    std::vector<IntentValue> intent_values;
    std::string extraction_instruction;  // contains "{answer_text}"
    std::optional<std::string> survey_scenario;
    // Placeholder the survey scenario asks participants to use; differs from
    // the template's placeholder for some bundled tasks.
    std::optional<std::string> survey_placeholder;
    std::string unit;

    /// The `{name}` token of the template, braces included.
    std::string placeholder() const;

    /// Throws Error(SchemaError) when the template does not hold exactly one
    /// placeholder occurrence or fewer than 2 intent values are given.
    void validate() const;

    bool survey_placeholder_mismatch() const { return survey_placeholder && *survey_placeholder != placeholder(); }

    friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

/// All `{identifier}` tokens in `text`, in order of appearance.
std::vector<std::string> find_placeholders(std::string_view text);

enum class OriginKind { Base, TranslationChain, Survey };

std::string_view to_string(OriginKind k) noexcept;

struct VariantOrigin {
    OriginKind kind = OriginKind::Base;
    std::vector<std::string> langs;  // hop targets for translation chains

    friend bool operator==(const VariantOrigin&, const VariantOrigin&) = default;
};

/// One intent-equivalent phrasing of a task template.
struct PromptVariant {
    std::string variant_id;
    std::string text;
    VariantOrigin origin;
    bool verified = false;
    std::optional<std::vector<double>> embedding;

    friend bool operator==(const PromptVariant&, const PromptVariant&) = default;
};

/// Zero-padded ids sort lexicographically in numeric order.
std::string make_variant_id(std::size_t index);

}  // namespace wmprobe
