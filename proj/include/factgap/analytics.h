#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "factgap/experiments.h"
#include "factgap/language.h"

namespace factgap {

/// Table-1 style row: entity-level statistics per (category, mode).
struct CategoryRollup {
    ResourceCategory category = ResourceCategory::VeryHigh;
    ExperimentTag mode = ExperimentTag::LangLang;
    double mean_score = 0.0;
    double std_score = 0.0;  // population, across entities
    double mean_num_facts = 0.0;
    std::size_t n_entities = 0;
};

/// Groups scores by (category of language, mode), pooling models. Entity
/// scores with no scored template are ignored. Rows come out in category
/// then mode order. Throws ValidationError for an unknown language.
std::vector<CategoryRollup> rollup_categories(std::span<const EntityScore> scores);

/// Table-2 style row: mean of per-entity template spreads.
struct TemplateSpreadRollup {
    ResourceCategory category = ResourceCategory::VeryHigh;
    ExperimentTag mode = ExperimentTag::LangLang;
    double mean_of_template_stds = 0.0;
    std::size_t n_entities = 0;
};

/// Only entities with at least two scored templates contribute.
std::vector<TemplateSpreadRollup> rollup_template_spread(std::span<const EntityScore> scores);

struct ScoreMatrix {
    ExperimentTag mode = ExperimentTag::LangLang;
    std::vector<std::string> languages;  // rows
    std::vector<std::string> models;     // columns
    std::vector<std::vector<std::optional<double>>> cells;
};

/// Cell (language, model) is the mean of EntityScore::mean over entities;
/// cells without data stay empty.
ScoreMatrix score_matrix(std::span<const EntityScore> scores, std::span<const std::string> languages,
                         std::span<const std::string> models, ExperimentTag mode);

/// One human-labelled fact of a validation response.
struct HumanAnnotatedFact {
    std::string response_id;
    std::string fact;
    bool gold_supported = false;
};

/// Verdicts for one response, in fact order.
struct PredictedResponse {
    std::string response_id;
    std::vector<FactVerdict> verdicts;
};

enum class PositiveClass { Supported, NotSupported };

struct ValidatorMetrics {
    double error_rate = 0.0;  // mean |predicted - gold| unpenalized supported fraction
    double micro_f1 = 0.0;    // percent, pooled over all facts
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    std::size_t false_negatives = 0;
    std::size_t true_negatives = 0;
    std::size_t responses = 0;
};

/// Compares predicted verdicts with gold labels. Responses are matched by
/// id and facts by position; F1 is for `positive` and is 100 when neither
/// side has any positive. Throws ValidationError on misalignment.
ValidatorMetrics validator_metrics(std::span<const PredictedResponse> predicted,
                                   std::span<const HumanAnnotatedFact> gold,
                                   PositiveClass positive = PositiveClass::Supported);

enum class ReportFormat { Csv, Json };

ReportFormat parse_report_format(std::string_view text);

struct Report {
    std::vector<CategoryRollup> categories;
    std::vector<TemplateSpreadRollup> spreads;
    std::vector<ScoreMatrix> matrices;
};

/// Builds every rollup plus one matrix per mode present, with languages in
/// table order and models sorted.
Report build_report(std::span<const EntityScore> scores);

/// Writes category_rollup, template_spread, matrix_{mode} and
/// matrix_{mode}.plot (long format) files. Output is deterministic; values
/// carry six decimals and absent matrix cells are written as null.
/// Returns the written paths, sorted.
std::vector<std::filesystem::path> emit_report(const Report& report, ReportFormat format,
                                               const std::filesystem::path& out_dir);

}  // namespace factgap
