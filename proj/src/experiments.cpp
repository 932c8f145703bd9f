#include "factgap/experiments.h"

#include <algorithm>
#include <cmath>
#include <set>

#include <spdlog/spdlog.h>

#include "factgap/errors.h"
#include "factgap/io.h"
#include "factgap/language.h"
#include "factgap/parallel.h"

namespace factgap {

namespace fs = std::filesystem;

std::string_view to_string(PromptMethod method) {
    return method == PromptMethod::LangPrompt ? "lang" : "en";
}

PromptMethod parse_prompt_method(std::string_view text) {
    if (text == "lang") return PromptMethod::LangPrompt;
    if (text == "en") return PromptMethod::EnPrompt;
    throw ValidationError("unknown prompting method '" + std::string(text) + "' (lang|en)");
}

void TemplateTable::set(std::string language, int template_id, std::string text) {
    entries_[{std::move(language), template_id}] = std::move(text);
}

const std::string* TemplateTable::find(std::string_view language, int template_id) const {
    auto it = entries_.find({std::string(language), template_id});
    return it == entries_.end() ? nullptr : &it->second;
}

TemplateTable TemplateTable::load(const fs::path& path) {
    TemplateTable table;
    for_each_jsonl(path, [&](const json& r, std::size_t line) {
        auto where = path.filename().string() + ":" + std::to_string(line) + ": ";
        try {
            auto language = r.at("language").get<std::string>();
            const int id = r.at("template_id").get<int>();
            auto text = r.at("text").get<std::string>();
            lookup_language(language);
            if (id < 0 || id >= static_cast<int>(kBiographyTemplates.size())) {
                throw ValidationError("template_id out of range");
            }
            if (text.find("{}") == std::string::npos) {
                throw ValidationError("template text lacks the {} placeholder");
            }
            if (table.find(language, id)) {
                throw ValidationError("duplicate template entry");
            }
            table.set(std::move(language), id, std::move(text));
        } catch (const ValidationError& e) {
            throw ValidationError(where + e.what());
        } catch (const json::exception& e) {
            throw ValidationError(where + e.what());
        }
    });
    return table;
}

void TemplateTable::save(const fs::path& path) const {
    std::vector<json> records;
    for (const auto& [key, text] : entries_) {
        records.push_back({{"language", key.first}, {"template_id", key.second}, {"text", text}});
    }
    write_file_atomic(path, to_jsonl(records));
}

std::string fill_template(std::string_view tmpl, std::string_view name) {
    std::string out(tmpl);
    if (auto pos = out.find("{}"); pos != std::string::npos) {
        out.replace(pos, 2, name);
    }
    return out;
}

namespace {

void check_template_id(int template_id) {
    if (template_id < 0 || template_id >= static_cast<int>(kBiographyTemplates.size())) {
        throw ValidationError("template_id " + std::to_string(template_id) + " out of range");
    }
}

}  // namespace

std::string english_template_with_directive(int template_id, std::string_view language) {
    check_template_id(template_id);
    std::string out(kBiographyTemplates[static_cast<std::size_t>(template_id)]);
    out += " in ";
    out += lookup_language(language).name;
    return out;
}

std::string build_prompt(const PromptSpec& spec, std::string_view canonical_name,
                         const TemplateTable& translations) {
    check_template_id(spec.template_id);
    if (spec.method == PromptMethod::EnPrompt) {
        return fill_template(english_template_with_directive(spec.template_id, spec.language),
                             canonical_name);
    }
    if (const auto* text = translations.find(spec.language, spec.template_id)) {
        return fill_template(*text, canonical_name);
    }
    if (spec.language == "en") {
        return fill_template(english_template_with_directive(spec.template_id, "en"),
                             canonical_name);
    }
    throw ValidationError("no translated template for (" + spec.language + ", " +
                          std::to_string(spec.template_id) + ")");
}

TemplateTable translate_templates(std::span<const std::string> languages, Gateway& translator) {
    TemplateTable table;
    for (const auto& language : languages) {
        if (language == "en") continue;
        for (int id = 0; id < static_cast<int>(kBiographyTemplates.size()); ++id) {
            auto text = translate(english_template_with_directive(id, language), "en", language,
                                  translator);
            if (text.find("{}") == std::string::npos) {
                spdlog::warn("translated template ({}, {}) lost its placeholder: {}", language, id,
                             text);
                continue;
            }
            table.set(language, id, std::move(text));
        }
    }
    return table;
}

namespace {

json to_json(const SanityReport& r) {
    json reasons = json::array();
    for (auto reason : r.reasons) reasons.push_back(to_string(reason));
    return {{"detected_language", r.detected_language},
            {"confidence", r.confidence},
            {"distinct_words", r.distinct_words},
            {"passed", r.passed},
            {"reasons", std::move(reasons)}};
}

SanityReport sanity_from_json(const json& j) {
    SanityReport r;
    r.detected_language = j.at("detected_language").get<std::string>();
    r.confidence = j.at("confidence").get<double>();
    r.distinct_words = j.at("distinct_words").get<std::size_t>();
    r.passed = j.at("passed").get<bool>();
    for (const auto& reason : j.at("reasons")) {
        r.reasons.push_back(parse_sanity_reason(reason.get<std::string>()));
    }
    return r;
}

}  // namespace

json to_json(const Generation& g) {
    return {{"entity_id", g.spec.entity_id},
            {"language", g.spec.language},
            {"template_id", g.spec.template_id},
            {"method", to_string(g.spec.method)},
            {"model", g.model},
            {"prompt", g.prompt},
            {"text", g.text},
            {"sanity", to_json(g.sanity)},
            {"error", g.error ? json(*g.error) : json(nullptr)}};
}

Generation generation_from_json(const json& j) {
    Generation g;
    g.spec.entity_id = j.at("entity_id").get<std::string>();
    g.spec.language = j.at("language").get<std::string>();
    g.spec.template_id = j.at("template_id").get<int>();
    g.spec.method = parse_prompt_method(j.at("method").get<std::string>());
    g.model = j.at("model").get<std::string>();
    g.prompt = j.at("prompt").get<std::string>();
    g.text = j.at("text").get<std::string>();
    g.sanity = sanity_from_json(j.at("sanity"));
    if (const auto& e = j.at("error"); !e.is_null()) g.error = e.get<std::string>();
    return g;
}

std::vector<Generation> run_generation(const Corpus& corpus, PromptMethod method, Gateway& subject,
                                       const TemplateTable& translations,
                                       const LanguageIdentifier& identifier,
                                       const GenerationOptions& options) {
    auto languages = options.languages.empty() ? corpus.languages() : options.languages;
    std::ranges::sort(languages);
    languages.erase(std::unique(languages.begin(), languages.end()), languages.end());
    for (const auto& l : languages) lookup_language(l);

    std::vector<Generation> out;
    for (const auto& entity : corpus.entities()) {
        for (const auto& language : languages) {
            for (int t = 0; t < static_cast<int>(kBiographyTemplates.size()); ++t) {
                Generation g;
                g.spec = {entity.id, language, t, method};
                g.model = subject.settings().model;
                g.prompt = build_prompt(g.spec, entity.canonical_name, translations);
                out.push_back(std::move(g));
            }
        }
    }

    parallel_for(out.size(), options.max_workers, [&](std::size_t i) {
        auto& g = out[i];
        try {
            auto response = subject.complete(subject.make_request(g.prompt));
            g.text = std::move(response.text);
            if (response.finish_reason == FinishReason::Error) {
                g.error = "backend reported finish_reason=error";
            }
        } catch (const Error& e) {
            g.error = e.what();
        }
        g.sanity = check(g.error ? std::string() : g.text, g.spec.language, identifier,
                         options.sanity);
    });
    return out;
}

std::string_view to_string(ExperimentTag tag) {
    switch (tag) {
        case ExperimentTag::LangLang: return "lang-lang";
        case ExperimentTag::LangEn: return "lang-en";
        case ExperimentTag::EnEn: return "en-en";
    }
    return "lang-lang";
}

ExperimentTag parse_experiment_tag(std::string_view text) {
    if (text == "lang-lang") return ExperimentTag::LangLang;
    if (text == "lang-en") return ExperimentTag::LangEn;
    if (text == "en-en") return ExperimentTag::EnEn;
    throw ValidationError("unknown experiment mode '" + std::string(text) +
                          "' (lang-lang|lang-en|en-en)");
}

ExperimentMode ExperimentMode::of(ExperimentTag tag) {
    switch (tag) {
        case ExperimentTag::LangLang: return {tag, PromptMethod::LangPrompt, false, false};
        case ExperimentTag::LangEn: return {tag, PromptMethod::LangPrompt, true, true};
        case ExperimentTag::EnEn: return {tag, PromptMethod::EnPrompt, true, true};
    }
    return {};
}

std::string ExperimentMode::knowledge_language(std::string_view response_language) const {
    return english_knowledge ? "en" : std::string(response_language);
}

std::string response_id(const PromptSpec& spec, std::string_view model) {
    return spec.entity_id + "/" + spec.language + "/" + std::string(model) + "/" +
           std::to_string(spec.template_id);
}

json to_json(const EntityScore& s) {
    json per_template = json::array();
    for (const auto& v : s.per_template_scores) per_template.push_back(v ? json(*v) : json(nullptr));
    return {{"entity_id", s.entity_id},
            {"language", s.language},
            {"model", s.model},
            {"mode", to_string(s.mode)},
            {"per_template_scores", std::move(per_template)},
            {"mean", s.mean},
            {"std", s.std_dev},
            {"mean_num_facts", s.mean_num_facts},
            {"n_templates_scored", s.n_templates_scored}};
}

EntityScore entity_score_from_json(const json& j) {
    EntityScore s;
    s.entity_id = j.at("entity_id").get<std::string>();
    s.language = j.at("language").get<std::string>();
    s.model = j.at("model").get<std::string>();
    s.mode = parse_experiment_tag(j.at("mode").get<std::string>());
    const auto& per = j.at("per_template_scores");
    for (std::size_t t = 0; t < s.per_template_scores.size() && t < per.size(); ++t) {
        if (!per[t].is_null()) s.per_template_scores[t] = per[t].get<double>();
    }
    s.mean = j.at("mean").get<double>();
    s.std_dev = j.at("std").get<double>();
    s.mean_num_facts = j.at("mean_num_facts").get<double>();
    s.n_templates_scored = j.at("n_templates_scored").get<std::size_t>();
    return s;
}

EntityScore fold_templates(std::string entity_id, std::string language, std::string model,
                           ExperimentTag mode, std::span<const ResponseScore> responses) {
    EntityScore s;
    s.entity_id = std::move(entity_id);
    s.language = std::move(language);
    s.model = std::move(model);
    s.mode = mode;
    std::array<std::optional<std::size_t>, 3> facts;
    for (const auto& r : responses) {
        check_template_id(r.spec.template_id);
        const auto t = static_cast<std::size_t>(r.spec.template_id);
        s.per_template_scores[t] = r.result.score;
        facts[t] = r.result.num_facts;
    }
    double sum = 0.0;
    double fact_sum = 0.0;
    for (std::size_t t = 0; t < s.per_template_scores.size(); ++t) {
        if (!s.per_template_scores[t]) continue;
        sum += *s.per_template_scores[t];
        fact_sum += static_cast<double>(*facts[t]);
        ++s.n_templates_scored;
    }
    if (s.n_templates_scored == 0) return s;
    const auto n = static_cast<double>(s.n_templates_scored);
    s.mean = sum / n;
    s.mean_num_facts = fact_sum / n;
    double sq = 0.0;
    for (const auto& v : s.per_template_scores) {
        if (v) sq += (*v - s.mean) * (*v - s.mean);
    }
    s.std_dev = std::sqrt(sq / n);
    return s;
}

namespace {

FactVerdict unsupported(const AtomicFact& fact) {
    FactVerdict v;
    v.fact = fact;
    v.supported = false;
    v.parse_status = ParseStatus::Fallback;
    return v;
}

/// Chunked, indexed knowledge docs keyed by doc. A doc without any token
/// maps to nullopt.
class IndexCache {
public:
    IndexCache(const Corpus& corpus, std::size_t max_tokens)
        : corpus_(corpus), max_tokens_(max_tokens) {}

    /// Not thread-safe; call before fanning out.
    void prepare(const DocKey& key) {
        if (indexes_.contains(key)) return;
        const auto* doc = corpus_.find_doc(key.entity_id, key.language, key.variant);
        if (!doc) return;
        auto passages = chunk(*doc, max_tokens_);
        if (passages.empty()) {
            indexes_.emplace(key, std::nullopt);
        } else {
            indexes_.emplace(key, PassageIndex::build(std::move(passages)));
        }
    }

    bool has_doc(const DocKey& key) const { return indexes_.contains(key); }

    const PassageIndex* get(const DocKey& key) const {
        auto it = indexes_.find(key);
        return it == indexes_.end() || !it->second ? nullptr : &*it->second;
    }

private:
    const Corpus& corpus_;
    std::size_t max_tokens_;
    std::map<DocKey, std::optional<PassageIndex>> indexes_;
};

std::vector<FactVerdict> judge_all(const std::vector<AtomicFact>& facts, const PassageIndex* index,
                                   std::string_view knowledge_language, Gateway& lm_eval,
                                   const ScoringOptions& options) {
    std::vector<FactVerdict> verdicts;
    verdicts.reserve(facts.size());
    for (const auto& fact : facts) {
        verdicts.push_back(index ? judge(fact, *index, knowledge_language, lm_eval, options.k,
                                         options.bm25)
                                 : unsupported(fact));
    }
    return verdicts;
}

}  // namespace

ExperimentResult run_experiment(std::span<const Generation> generations, ExperimentTag tag,
                                const Corpus& corpus, Gateway& lm_eval, Gateway* translator,
                                std::span<const Demonstration> demos,
                                const ScoringOptions& options) {
    const auto mode = ExperimentMode::of(tag);
    std::vector<const Generation*> sorted;
    for (const auto& g : generations) {
        if (g.spec.method != mode.prompt_method) {
            throw PreconditionError("experiment " + std::string(to_string(tag)) + " needs " +
                                    std::string(to_string(mode.prompt_method)) +
                                    "-prompt generations, got " +
                                    std::string(to_string(g.spec.method)) + " for " +
                                    response_id(g.spec, g.model));
        }
        sorted.push_back(&g);
    }
    std::ranges::sort(sorted, [](const Generation* a, const Generation* b) {
        return std::tie(a->spec, a->model) < std::tie(b->spec, b->model);
    });

    IndexCache indexes(corpus, options.max_tokens);
    std::vector<const Generation*> work;
    for (const auto* g : sorted) {
        if (!g->scorable()) continue;
        const DocKey key{g->spec.entity_id, mode.knowledge_language(g->spec.language),
                         DocVariant::Original};
        indexes.prepare(key);
        if (!indexes.has_doc(key)) {
            spdlog::warn("no {} knowledge doc for entity '{}'; skipping {}", key.language,
                         key.entity_id, response_id(g->spec, g->model));
            continue;
        }
        if (mode.translate_response && g->spec.language != "en" && translator == nullptr) {
            throw PreconditionError("experiment " + std::string(to_string(tag)) +
                                    " needs a translator");
        }
        work.push_back(g);
    }

    ExperimentResult result;
    result.responses.resize(work.size());
    parallel_for(work.size(), options.max_workers, [&](std::size_t i) {
        const auto& g = *work[i];
        auto& r = result.responses[i];
        r.spec = g.spec;
        r.model = g.model;
        r.mode = tag;
        std::string language = g.spec.language;
        r.judged_text = g.text;
        if (mode.translate_response && language != "en") {
            r.judged_text = translate(g.text, language, "en", *translator);
            language = "en";
        }
        const auto knowledge = mode.knowledge_language(g.spec.language);
        const auto facts = decompose(r.judged_text, language, lm_eval, demos);
        r.verdicts = judge_all(facts, indexes.get({g.spec.entity_id, knowledge, DocVariant::Original}),
                               knowledge, lm_eval, options);
        r.result = score(r.verdicts, options.gamma, options.boundary);
    });

    // Fold per (entity, language, model), over every generated pair.
    using GroupKey = std::tuple<std::string, std::string, std::string>;
    std::map<GroupKey, std::vector<ResponseScore>> groups;
    for (const auto* g : sorted) groups[{g->spec.entity_id, g->spec.language, g->model}];
    for (const auto& r : result.responses) {
        groups[{r.spec.entity_id, r.spec.language, r.model}].push_back(r);
    }
    for (const auto& [key, responses] : groups) {
        const auto& [entity, language, model] = key;
        result.scores.push_back(fold_templates(entity, language, model, tag, responses));
    }
    return result;
}

json to_json(const AuditRecord& r) {
    json verdicts = json::array();
    for (const auto& v : r.verdicts) verdicts.push_back(to_json(v));
    return {{"entity_id", r.entity_id},
            {"language", r.language},
            {"result", to_json(r.result)},
            {"verdicts", std::move(verdicts)}};
}

std::vector<AuditRecord> audit_knowledge(const Corpus& corpus, std::string_view language,
                                         Gateway* translator, Gateway& lm_eval,
                                         std::span<const Demonstration> demos,
                                         const ScoringOptions& options) {
    lookup_language(language);
    IndexCache indexes(corpus, options.max_tokens);
    std::vector<const Entity*> entities;
    for (const auto& e : corpus.entities()) {
        const auto* doc = corpus.find_doc(e.id, language);
        const auto* english = corpus.find_doc(e.id, "en");
        if (!doc || !english) {
            spdlog::warn("audit {}: entity '{}' lacks a {} or en doc; skipped", language, e.id,
                         language);
            continue;
        }
        indexes.prepare(english->key());
        if (language != "en" && translator == nullptr &&
            !corpus.find_doc(e.id, language, DocVariant::TranslatedToEnglish)) {
            throw PreconditionError("audit of " + std::string(language) + " needs a translator");
        }
        entities.push_back(&e);
    }

    std::vector<AuditRecord> out(entities.size());
    parallel_for(entities.size(), options.max_workers, [&](std::size_t i) {
        const auto& e = *entities[i];
        auto& record = out[i];
        record.entity_id = e.id;
        record.language = std::string(language);
        std::string text;
        if (language == "en") {
            text = corpus.find_doc(e.id, "en")->text;
        } else if (const auto* stored =
                       corpus.find_doc(e.id, language, DocVariant::TranslatedToEnglish)) {
            text = stored->text;
        } else {
            text = translate(corpus.find_doc(e.id, language)->text, language, "en", *translator);
        }
        const auto facts = decompose(text, "en", lm_eval, demos);
        record.verdicts = judge_all(facts, indexes.get({e.id, "en", DocVariant::Original}), "en",
                                    lm_eval, options);
        record.result = score(record.verdicts, options.gamma, options.boundary);
    });
    return out;
}

}  // namespace factgap
