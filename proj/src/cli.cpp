#include "factgap/cli.h"

#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "factgap/analytics.h"
#include "factgap/config.h"
#include "factgap/corpus.h"
#include "factgap/errors.h"
#include "factgap/experiments.h"
#include "factgap/io.h"
#include "factgap/sanity.h"

namespace factgap {

namespace fs = std::filesystem;

namespace {

struct Options {
    std::string entities, docs, out;
    std::string config;
    std::string backend;
    std::string method;
    std::string mode;
    std::string generations;
    std::string language;
    std::vector<std::string> scores;
    std::string format = "csv";
    std::string gold;
    std::string verdicts;
};

void require_exists(const fs::path& p, const char* what) {
    std::error_code ec;
    if (!fs::exists(p, ec)) {
        throw ValidationError(std::string(what) + " not found: " + p.string());
    }
}

std::shared_ptr<const ResponseCache> open_cache(const RunConfig& config) {
    return std::make_shared<ResponseCache>(config.cache_dir);
}

NgramLanguageIdentifier identifier_for(const RunConfig& config, const Corpus& corpus) {
    NgramProfileOptions options;
    options.confidence_margin = config.confidence_margin;
    const auto digest = corpus.digest();
    return load_or_train_identifier(corpus.texts_by_language(), digest,
                                    config.cache_dir / ("profiles-" + digest.substr(0, 16) + ".json"),
                                    options);
}

ScoringOptions scoring_options(const RunConfig& config) {
    ScoringOptions o;
    o.gamma = config.gamma;
    o.boundary = config.gamma_boundary;
    o.bm25 = config.bm25;
    o.k = config.k;
    o.max_tokens = config.max_tokens;
    o.max_workers = static_cast<std::size_t>(config.backend(config.lm_eval).max_in_flight);
    return o;
}

int cmd_ingest(const Options& o, std::ostream& out) {
    require_exists(o.entities, "entities file");
    require_exists(o.docs, "docs file");
    const auto corpus = load_corpus(o.entities, o.docs);
    save_corpus(corpus, o.out);
    out << fmt::format("ingested {} entities and {} docs into {}\n", corpus.entities().size(),
                       corpus.docs().size(), o.out);
    return kExitOk;
}

int cmd_generate(const Options& o, std::ostream& out) {
    const auto config = RunConfig::load(o.config);
    const auto method = parse_prompt_method(o.method);
    config.backend(o.backend);
    require_exists(config.corpus, "corpus directory");
    const auto corpus = load_corpus_dir(config.corpus);
    TemplateTable templates;
    if (method == PromptMethod::LangPrompt) {
        require_exists(config.template_table, "template table");
        templates = TemplateTable::load(config.template_table);
    }
    const auto identifier = identifier_for(config, corpus);
    auto subject = make_gateway(config, o.backend, kSubjectTemperature, open_cache(config));

    GenerationOptions options;
    options.languages = config.languages;
    options.sanity.distinct_word_min = config.distinct_word_min;
    options.max_workers = static_cast<std::size_t>(config.backend(o.backend).max_in_flight);
    const auto generations =
        run_generation(corpus, method, *subject, templates, identifier, options);

    std::vector<json> records;
    std::map<std::string, std::pair<std::size_t, std::size_t>> pass_rate;
    std::size_t failures = 0;
    for (const auto& g : generations) {
        records.push_back(to_json(g));
        auto& [passed, total] = pass_rate[g.spec.language];
        passed += g.sanity.passed ? 1 : 0;
        ++total;
        failures += g.error ? 1 : 0;
    }
    const auto path = config.run_dir() / "generations" /
                      (o.backend + "-" + std::string(to_string(method)) + ".jsonl");
    write_file_atomic(path, to_jsonl(records));

    out << "sanity pass rate by language:\n";
    for (const auto& [language, counts] : pass_rate) {
        out << fmt::format("  {}: {}/{} ({:.1f}%)\n", language, counts.first, counts.second,
                           100.0 * static_cast<double>(counts.first) /
                               static_cast<double>(counts.second));
    }
    out << fmt::format("{} generations, {} failed, {} backend calls, {} cache hits\n",
                       generations.size(), failures, subject->backend_calls(),
                       subject->cache_hits());
    out << "wrote " << path.string() << "\n";
    return failures > 0 ? kExitRuntime : kExitOk;
}

std::vector<Generation> load_generations(const fs::path& path) {
    std::vector<Generation> out;
    for_each_jsonl(path, [&](const json& r, std::size_t line) {
        try {
            out.push_back(generation_from_json(r));
        } catch (const json::exception& e) {
            throw ValidationError(path.filename().string() + ":" + std::to_string(line) + ": " +
                                  e.what());
        }
    });
    return out;
}

int cmd_score(const Options& o, std::ostream& out) {
    const auto config = RunConfig::load(o.config);
    const auto tag = parse_experiment_tag(o.mode);
    require_exists(o.generations, "generations file");
    require_exists(config.corpus, "corpus directory");
    require_exists(config.demos, "demonstration file");
    const auto corpus = load_corpus_dir(config.corpus);
    const auto demos = load_demonstrations(config.demos);
    const auto generations = load_generations(o.generations);

    auto cache = open_cache(config);
    auto lm_eval = make_gateway(config, config.lm_eval, kEvaluatorTemperature, cache);
    std::unique_ptr<Gateway> translator;
    if (ExperimentMode::of(tag).translate_response) {
        translator = make_gateway(config, config.translator, kEvaluatorTemperature, cache);
    }
    const auto result = run_experiment(generations, tag, corpus, *lm_eval, translator.get(), demos,
                                       scoring_options(config));

    std::vector<json> verdicts;
    std::vector<json> responses;
    for (const auto& r : result.responses) {
        const auto id = response_id(r.spec, r.model);
        for (std::size_t i = 0; i < r.verdicts.size(); ++i) {
            auto v = to_json(r.verdicts[i]);
            v["response_id"] = id;
            v["fact_index"] = i;
            v["mode"] = to_string(tag);
            verdicts.push_back(std::move(v));
        }
        responses.push_back({{"response_id", id},
                             {"entity_id", r.spec.entity_id},
                             {"language", r.spec.language},
                             {"model", r.model},
                             {"template_id", r.spec.template_id},
                             {"mode", to_string(tag)},
                             {"judged_text", r.judged_text},
                             {"result", to_json(r.result)}});
    }
    std::vector<json> scores;
    for (const auto& s : result.scores) scores.push_back(to_json(s));

    const auto dir = config.run_dir() /
                     ("score-" + std::string(to_string(tag)) + "-" +
                      fs::path(o.generations).stem().string());
    write_file_atomic(dir / "verdicts.jsonl", to_jsonl(verdicts));
    write_file_atomic(dir / "responses.jsonl", to_jsonl(responses));
    write_file_atomic(dir / "scores.jsonl", to_jsonl(scores));

    std::size_t scored = 0;
    for (const auto& s : result.scores) scored += s.n_templates_scored > 0 ? 1 : 0;
    out << fmt::format("{}: scored {} responses, {} of {} entity-language pairs\n", to_string(tag),
                       result.responses.size(), scored, result.scores.size());
    out << fmt::format("evaluator: {} backend calls, {} cache hits\n", lm_eval->backend_calls(),
                       lm_eval->cache_hits());
    out << fmt::format("translator: {} calls\n",
                       translator ? translator->call_log().size() : std::size_t{0});
    out << "wrote " << dir.string() << "\n";
    return kExitOk;
}

int cmd_audit(const Options& o, std::ostream& out) {
    const auto config = RunConfig::load(o.config);
    require_exists(config.corpus, "corpus directory");
    require_exists(config.demos, "demonstration file");
    const auto corpus = load_corpus_dir(config.corpus);
    const auto demos = load_demonstrations(config.demos);
    auto cache = open_cache(config);
    auto lm_eval = make_gateway(config, config.lm_eval, kEvaluatorTemperature, cache);
    std::unique_ptr<Gateway> translator;
    if (o.language != "en") {
        translator = make_gateway(config, config.translator, kEvaluatorTemperature, cache);
    }
    const auto records = audit_knowledge(corpus, o.language, translator.get(), *lm_eval, demos,
                                         scoring_options(config));
    std::vector<json> lines;
    double sum = 0.0;
    for (const auto& r : records) {
        lines.push_back(to_json(r));
        sum += r.result.score;
    }
    const auto path = config.run_dir() / "audit" / (o.language + ".jsonl");
    write_file_atomic(path, to_jsonl(lines));
    out << fmt::format("audit {}: {} entities, mean score {:.6f}\n", o.language, records.size(),
                       records.empty() ? 0.0 : sum / static_cast<double>(records.size()));
    out << "wrote " << path.string() << "\n";
    return kExitOk;
}

int cmd_report(const Options& o, std::ostream& out) {
    const auto config = RunConfig::load(o.config);
    const auto format = parse_report_format(o.format);
    std::vector<EntityScore> scores;
    for (const auto& p : o.scores) {
        require_exists(p, "scores file");
        for_each_jsonl(p, [&](const json& r, std::size_t line) {
            try {
                scores.push_back(entity_score_from_json(r));
            } catch (const json::exception& e) {
                throw ValidationError(fs::path(p).filename().string() + ":" + std::to_string(line) +
                                      ": " + e.what());
            }
        });
    }
    const auto dir = config.run_dir() / ("report-" + o.format);
    const auto files = emit_report(build_report(scores), format, dir);
    for (const auto& f : files) out << "wrote " << f.string() << "\n";
    return kExitOk;
}

int cmd_validate(const Options& o, std::ostream& out) {
    RunConfig::load(o.config);
    require_exists(o.gold, "gold file");
    require_exists(o.verdicts, "verdicts file");
    std::vector<HumanAnnotatedFact> gold;
    for_each_jsonl(o.gold, [&](const json& r, std::size_t line) {
        try {
            gold.push_back({r.at("response_id").get<std::string>(), r.at("fact").get<std::string>(),
                            r.at("gold_supported").get<bool>()});
        } catch (const json::exception& e) {
            throw ValidationError(fs::path(o.gold).filename().string() + ":" +
                                  std::to_string(line) + ": " + e.what());
        }
    });
    std::vector<PredictedResponse> predicted;
    std::map<std::string, std::size_t> slot;
    std::map<std::string, std::vector<std::pair<std::size_t, FactVerdict>>> ordered;
    for_each_jsonl(o.verdicts, [&](const json& r, std::size_t line) {
        try {
            const auto id = r.at("response_id").get<std::string>();
            FactVerdict v;
            v.fact.text = r.at("fact").get<std::string>();
            v.supported = r.at("supported").get<bool>();
            auto& facts = ordered[id];
            facts.emplace_back(r.value("fact_index", facts.size()), std::move(v));
            if (slot.emplace(id, predicted.size()).second) predicted.push_back({id, {}});
        } catch (const json::exception& e) {
            throw ValidationError(fs::path(o.verdicts).filename().string() + ":" +
                                  std::to_string(line) + ": " + e.what());
        }
    });
    for (auto& [id, facts] : ordered) {
        std::ranges::stable_sort(facts, {}, &std::pair<std::size_t, FactVerdict>::first);
        for (auto& [_, v] : facts) predicted[slot.at(id)].verdicts.push_back(std::move(v));
    }
    const auto m = validator_metrics(predicted, gold, PositiveClass::Supported);
    const auto ns = validator_metrics(predicted, gold, PositiveClass::NotSupported);
    out << fmt::format("responses: {}\n", m.responses);
    out << fmt::format("error_rate: {:.4f}\n", m.error_rate);
    out << fmt::format("micro_f1: {:.2f}\n", m.micro_f1);
    out << fmt::format("micro_f1_not_supported: {:.2f}\n", ns.micro_f1);
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multilingual factual-precision evaluation toolkit", "factgap"};
    app.require_subcommand(1);
    Options o;

    auto* ingest = app.add_subcommand("ingest", "Validate and store a corpus");
    ingest->add_option("--entities", o.entities, "Entity records")->required();
    ingest->add_option("--docs", o.docs, "Knowledge doc records")->required();
    ingest->add_option("--out", o.out, "Output corpus directory")->required();

    auto* generate = app.add_subcommand("generate", "Generate and sanity-check biographies");
    generate->add_option("--config", o.config)->required();
    generate->add_option("--backend", o.backend, "Subject model backend name")->required();
    generate->add_option("--method", o.method)->required()->check(CLI::IsMember({"lang", "en"}));

    auto* score = app.add_subcommand("score", "Score generations under one experiment mode");
    score->add_option("--config", o.config)->required();
    score->add_option("--mode", o.mode)
        ->required()
        ->check(CLI::IsMember({"lang-lang", "lang-en", "en-en"}));
    score->add_option("--generations", o.generations)->required();

    auto* audit = app.add_subcommand("audit", "Score knowledge docs against the English docs");
    audit->add_option("--config", o.config)->required();
    audit->add_option("--language", o.language)->required();

    auto* report = app.add_subcommand("report", "Aggregate entity scores into report files");
    report->add_option("--config", o.config)->required();
    report->add_option("--scores", o.scores)->required()->expected(1, -1);
    report->add_option("--format", o.format)->check(CLI::IsMember({"csv", "json"}));

    auto* validate = app.add_subcommand("validate", "Error rate and F1 against gold labels");
    validate->add_option("--config", o.config)->required();
    validate->add_option("--gold", o.gold)->required();
    validate->add_option("--verdicts", o.verdicts)->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (ingest->parsed()) return cmd_ingest(o, out);
        if (generate->parsed()) return cmd_generate(o, out);
        if (score->parsed()) return cmd_score(o, out);
        if (audit->parsed()) return cmd_audit(o, out);
        if (report->parsed()) return cmd_report(o, out);
        if (validate->parsed()) return cmd_validate(o, out);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const PreconditionError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace factgap
