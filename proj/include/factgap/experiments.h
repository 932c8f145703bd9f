#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "factgap/corpus.h"
#include "factgap/factscore.h"
#include "factgap/lm_gateway.h"
#include "factgap/sanity.h"

namespace factgap {

/// The three English biography templates; "{}" takes the entity name.
inline constexpr std::array<std::string_view, 3> kBiographyTemplates{
    "Tell me a biography of {}",
    "Give me a biography of {}",
    "Please give me a biography of {}",
};

enum class PromptMethod {
    LangPrompt,  // template translated into the target language
    EnPrompt,    // English template plus "in {language}"
};

std::string_view to_string(PromptMethod method);  // "lang" / "en"
PromptMethod parse_prompt_method(std::string_view text);

struct PromptSpec {
    std::string entity_id;
    std::string language;
    int template_id = 0;
    PromptMethod method = PromptMethod::EnPrompt;

    auto operator<=>(const PromptSpec&) const = default;
};

/// Reviewed translations of the templates, one per (language, template),
/// each already carrying the translated "in {language}" directive.
class TemplateTable {
public:
    void set(std::string language, int template_id, std::string text);
    const std::string* find(std::string_view language, int template_id) const;
    std::size_t size() const noexcept { return entries_.size(); }

    /// Line-delimited {language, template_id, text} records.
    static TemplateTable load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

private:
    std::map<std::pair<std::string, int>, std::string> entries_;
};

/// Replaces the first "{}" with `name`.
std::string fill_template(std::string_view tmpl, std::string_view name);

/// The English template with its "in {language}" directive, unfilled.
std::string english_template_with_directive(int template_id, std::string_view language);

/// Prompt for one generation. English LangPrompt falls back to the English
/// template with directive when the table has no "en" row. Throws
/// ValidationError when a LangPrompt translation is missing.
std::string build_prompt(const PromptSpec& spec, std::string_view canonical_name,
                         const TemplateTable& translations);

/// Translates every English template-with-directive into each language once.
/// Entries whose translation lost the "{}" placeholder are skipped with a
/// warning and must be fixed by hand.
TemplateTable translate_templates(std::span<const std::string> languages, Gateway& translator);

struct Generation {
    PromptSpec spec;
    std::string model;
    std::string prompt;
    std::string text;
    SanityReport sanity;
    std::optional<std::string> error;  // gateway failure; never scored

    bool scorable() const noexcept { return !error && sanity.passed; }
};

nlohmann::json to_json(const Generation& g);
Generation generation_from_json(const nlohmann::json& j);

struct GenerationOptions {
    std::vector<std::string> languages;  // empty: every language in the corpus
    SanityOptions sanity;
    std::size_t max_workers = 8;
};

/// One sanity-checked generation per (entity, language, template), sorted
/// by (entity_id, language, template_id). Gateway errors become failed
/// records.
std::vector<Generation> run_generation(const Corpus& corpus, PromptMethod method, Gateway& subject,
                                       const TemplateTable& translations,
                                       const LanguageIdentifier& identifier,
                                       const GenerationOptions& options = {});

enum class ExperimentTag { LangLang, LangEn, EnEn };

std::string_view to_string(ExperimentTag tag);  // "lang-lang", "lang-en", "en-en"
ExperimentTag parse_experiment_tag(std::string_view text);

/// (prompt language, knowledge language) wiring of one experiment.
struct ExperimentMode {
    ExperimentTag tag = ExperimentTag::LangLang;
    PromptMethod prompt_method = PromptMethod::LangPrompt;
    bool english_knowledge = false;
    bool translate_response = false;

    static ExperimentMode of(ExperimentTag tag);
    std::string knowledge_language(std::string_view response_language) const;
};

struct ScoringOptions {
    int gamma = 10;
    GammaBoundary boundary = GammaBoundary::LessOrEqual;
    Bm25Params bm25;
    std::size_t k = 5;
    std::size_t max_tokens = 128;  // passage size
    std::size_t max_workers = 8;
};

/// Scoring of one generation.
struct ResponseScore {
    PromptSpec spec;
    std::string model;
    ExperimentTag mode = ExperimentTag::LangLang;
    std::string judged_text;  // the response, translated when the mode says so
    std::vector<FactVerdict> verdicts;
    ScoreResult result;
};

/// "{entity}/{language}/{model}/{template}"
std::string response_id(const PromptSpec& spec, std::string_view model);

/// Template-averaged score of one (entity, language, model, mode).
struct EntityScore {
    std::string entity_id;
    std::string language;
    std::string model;
    ExperimentTag mode = ExperimentTag::LangLang;
    std::array<std::optional<double>, 3> per_template_scores;
    double mean = 0.0;
    double std_dev = 0.0;  // population
    double mean_num_facts = 0.0;
    std::size_t n_templates_scored = 0;
};

nlohmann::json to_json(const EntityScore& s);
EntityScore entity_score_from_json(const nlohmann::json& j);

/// Mean, population std and mean fact count over the scored templates.
EntityScore fold_templates(std::string entity_id, std::string language, std::string model,
                           ExperimentTag mode, std::span<const ResponseScore> responses);

struct ExperimentResult {
    std::vector<ResponseScore> responses;  // sorted by spec
    std::vector<EntityScore> scores;       // sorted by (entity, language, model)
};

/// Scores every scorable generation under `tag` and folds templates into
/// EntityScores. (entity, language) pairs without any scorable generation
/// get an EntityScore with n_templates_scored = 0. `translator` may be null
/// for LangLang. Throws PreconditionError when a generation used the wrong
/// prompting method for the mode.
ExperimentResult run_experiment(std::span<const Generation> generations, ExperimentTag tag,
                                const Corpus& corpus, Gateway& lm_eval, Gateway* translator,
                                std::span<const Demonstration> demos,
                                const ScoringOptions& options = {});

struct AuditRecord {
    std::string entity_id;
    std::string language;
    ScoreResult result;
    std::vector<FactVerdict> verdicts;
};

nlohmann::json to_json(const AuditRecord& r);

/// Scores each entity's `language` doc (translated to English unless it is
/// English; a stored translated variant is used when present) against the
/// entity's English doc. Entities missing either doc are skipped.
std::vector<AuditRecord> audit_knowledge(const Corpus& corpus, std::string_view language,
                                         Gateway* translator, Gateway& lm_eval,
                                         std::span<const Demonstration> demos,
                                         const ScoringOptions& options = {});

}  // namespace factgap
