#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "cli_support.h"
#include "factgap/analytics.h"
#include "factgap/config.h"
#include "factgap/corpus.h"
#include "factgap/experiments.h"
#include "factgap/factscore.h"
#include "factgap/retrieval.h"
#include "factgap/sanity.h"
#include "test_support.h"

using namespace factgap;
namespace fs = std::filesystem;

namespace {

// Tolerances and time budgets.
constexpr double kScoreTolerance = 1e-12;
constexpr double kBm25Tolerance = 1e-9;
constexpr double kMetricTolerance = 1e-12;
constexpr double kLatinAccuracy = 0.95;
constexpr double kCjkThaiAccuracy = 0.80;
constexpr auto kScoreBudget = std::chrono::seconds(1);
constexpr auto kBm25Budget = std::chrono::seconds(10);
constexpr auto kPipelineBudget = std::chrono::seconds(30);
constexpr auto kNoBudget = std::chrono::hours(1);

// exp(-9) to 17 significant digits.
constexpr double kExpMinus9 = 1.2340980408667956e-4;

struct Outcome {
    bool passed = false;
    std::string detail;
};

class Suite {
public:
    void run(const std::string& name, std::chrono::milliseconds budget, const std::function<Outcome()>& body) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = body();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const auto elapsed =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
        if (elapsed > budget) {
            o.passed = false;
            o.detail += fmt::format("; over budget of {} ms", budget.count());
        }
        std::cout << (o.passed ? "PASS " : "FAIL ") << name << ": " << o.detail << " [" << elapsed.count()
                  << " ms]\n";
        failures_ += o.passed ? 0 : 1;
    }
    int failures() const { return failures_; }

private:
    int failures_ = 0;
};

FactVerdict verdict(bool supported) {
    FactVerdict v;
    v.fact.text = "f";
    v.supported = supported;
    v.parse_status = ParseStatus::Clean;
    return v;
}

double reference_score(std::size_t n, std::size_t supported, int gamma) {
    if (n == 0) return 0.0;
    const double p = static_cast<double>(n) <= gamma ? std::exp((1.0 - gamma) / static_cast<double>(n)) : 1.0;
    return p * static_cast<double>(supported) / static_cast<double>(n);
}

Outcome score_oracle() {
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = rng() % 201;
        const int gamma = 1 + static_cast<int>(rng() % 20);
        std::vector<FactVerdict> vs;
        std::size_t supported = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const bool s = rng() % 2;
            supported += s;
            vs.push_back(verdict(s));
        }
        worst = std::max(worst, std::abs(score(vs, gamma).score - reference_score(n, supported, gamma)));
    }
    std::vector<FactVerdict> hundred(100, verdict(true));
    hundred[0].supported = false;
    const double ninety_nine = score(hundred, 10).score;
    const double single = penalty(1, 10);
    const bool ok = worst <= kScoreTolerance && ninety_nine == 0.99 &&
                    std::abs(single - kExpMinus9) <= kScoreTolerance;
    return {ok, fmt::format("1000 vectors, max error {:.3g}; 99/100 -> {}; penalty(1,10) = {:.17g}", worst,
                            ninety_nine, single)};
}

Passage make_passage(std::string text, std::size_t index) {
    Passage p;
    p.doc_key = {"e", "en", DocVariant::Original};
    p.index = index;
    p.text = std::move(text);
    p.token_count = tokenize(p.text, "en").size();
    p.span = {0, p.text.size()};
    return p;
}

// Full scan, no index.
std::vector<std::pair<std::size_t, double>> naive_bm25(const std::vector<Passage>& passages,
                                                       const std::string& query) {
    constexpr double k1 = 1.5, b = 0.75;
    std::vector<std::vector<std::string>> docs;
    double total = 0;
    for (const auto& p : passages) {
        docs.push_back(tokenize(p.text, "en"));
        total += static_cast<double>(docs.back().size());
    }
    const double n = static_cast<double>(docs.size());
    const double avgdl = total / n;
    auto q = tokenize(query, "en");
    std::sort(q.begin(), q.end());
    q.erase(std::unique(q.begin(), q.end()), q.end());
    std::vector<std::pair<std::size_t, double>> out;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        double s = 0;
        for (const auto& term : q) {
            double df = 0;
            for (const auto& d : docs) df += std::count(d.begin(), d.end(), term) > 0 ? 1 : 0;
            const double tf = static_cast<double>(std::count(docs[i].begin(), docs[i].end(), term));
            if (tf == 0) continue;
            const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
            const double dl = static_cast<double>(docs[i].size());
            s += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl));
        }
        if (s > 0) out.emplace_back(i, s);
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.second > y.second; });
    return out;
}

Outcome bm25_oracle() {
    std::mt19937 rng(77);
    double worst = 0.0;
    std::size_t mismatched = 0, hits = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng() % 50;
        const int vocab = 5 + static_cast<int>(rng() % 40);
        std::vector<Passage> ps;
        for (std::size_t i = 0; i < n; ++i) {
            std::string t;
            const int len = 1 + static_cast<int>(rng() % 40);
            for (int w = 0; w < len; ++w) t += "t" + std::to_string(rng() % vocab) + " ";
            ps.push_back(make_passage(t, i));
        }
        const auto index = build_index(ps);
        std::string query;
        const int qlen = 1 + static_cast<int>(rng() % 6);
        for (int w = 0; w < qlen; ++w) query += "t" + std::to_string(rng() % (vocab + 5)) + " ";
        const auto expected = naive_bm25(ps, query);
        const auto got = retrieve(index, query, "en", n);
        if (got.size() != expected.size()) {
            ++mismatched;
            continue;
        }
        for (std::size_t i = 0; i < got.size(); ++i) {
            ++hits;
            if (got[i].passage.index != expected[i].first) ++mismatched;
            worst = std::max(worst, std::abs(got[i].score - expected[i].second));
        }
    }
    return {mismatched == 0 && worst <= kBm25Tolerance,
            fmt::format("100 corpora, {} ranked hits, {} rank mismatches, max score error {:.3g}", hits,
                        mismatched, worst)};
}

std::string tree_digest(const fs::path& root) {
    std::vector<std::string> entries;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) {
            entries.push_back(fs::relative(e.path(), root).generic_string() + "\n" + testing::read_text(e.path()));
        }
    }
    std::sort(entries.begin(), entries.end());
    std::string all;
    for (const auto& e : entries) all += e + "\n";
    return all;
}

std::size_t file_count(const fs::path& root) {
    std::size_t n = 0;
    for (const auto& e : fs::recursive_directory_iterator(root)) n += e.is_regular_file() ? 1 : 0;
    return n;
}

// generate -> check -> score in all three modes -> report, through the CLI.
std::string pipeline(const fs::path& dir, std::string& error) {
    const auto config = testing::stage_e2e(dir).string();
    const auto step = [&](const std::vector<std::string>& args) {
        const auto r = testing::invoke(args);
        if (r.code != 0 && error.empty()) error = args[0] + ": " + r.err;
        return r.code == 0;
    };
    step({"generate", "--config", config, "--backend", "subject", "--method", "lang"});
    step({"generate", "--config", config, "--backend", "subject", "--method", "en"});
    const auto run_dir = RunConfig::load(config).run_dir();
    const auto lang = (run_dir / "generations" / "subject-lang.jsonl").string();
    const auto en = (run_dir / "generations" / "subject-en.jsonl").string();
    step({"score", "--config", config, "--mode", "lang-lang", "--generations", lang});
    step({"score", "--config", config, "--mode", "lang-en", "--generations", lang});
    step({"score", "--config", config, "--mode", "en-en", "--generations", en});
    const std::vector<std::string> scores{(run_dir / "score-lang-lang-subject-lang" / "scores.jsonl").string(),
                                          (run_dir / "score-lang-en-subject-lang" / "scores.jsonl").string(),
                                          (run_dir / "score-en-en-subject-en" / "scores.jsonl").string()};
    for (const auto* format : {"csv", "json"}) {
        std::vector<std::string> args{"report", "--config", config, "--format", format, "--scores"};
        args.insert(args.end(), scores.begin(), scores.end());
        step(args);
    }
    return tree_digest(fs::path(config).parent_path() / "out");
}

Outcome end_to_end() {
    testing::TempDir a, b;
    std::string error_a, error_b;
    const auto first = pipeline(a.path(), error_a);
    const auto second = pipeline(b.path(), error_b);
    if (!error_a.empty() || !error_b.empty()) return {false, error_a + error_b};
    const auto files = file_count(a / "e2e" / "out");
    return {first == second && files > 0,
            fmt::format("3 entities x {{en, fr, zh}}, {} output files, trees {}", files,
                        first == second ? "byte-identical" : "differ")};
}

std::unique_ptr<Gateway> fixture_gateway(const std::string& name, const fs::path& rules, double temperature) {
    return std::make_unique<Gateway>(name, std::make_shared<FixtureBackend>(name, std::nullopt, rules), nullptr,
                                     ModelSettings{"fixture-" + name, temperature, 1024, {}});
}

Outcome mode_contracts() {
    const auto e2e = testing::fixtures() / "e2e";
    const fs::path data = FACTGAP_DATA;
    const auto corpus = load_corpus_dir(e2e / "corpus");
    const auto templates = TemplateTable::load(data / "templates.jsonl");
    const auto demos = load_demonstrations(data / "demos.jsonl");
    const auto identifier = NgramLanguageIdentifier::train(corpus.texts_by_language());

    auto lang_subject = fixture_gateway("subject", e2e / "subject" / "rules.jsonl", 0.7);
    const auto lang_gens = run_generation(corpus, PromptMethod::LangPrompt, *lang_subject, templates, identifier);
    auto en_subject = fixture_gateway("subject", e2e / "subject" / "rules.jsonl", 0.7);
    const auto en_gens = run_generation(corpus, PromptMethod::EnPrompt, *en_subject, templates, identifier);

    auto judge = fixture_gateway("judge", e2e / "judge_rules.jsonl", 0.0);
    auto translator = fixture_gateway("translator", e2e / "translator" / "rules.jsonl", 0.0);
    run_experiment(lang_gens, ExperimentTag::LangLang, corpus, *judge, translator.get(), demos);
    const auto lang_lang_translations = translator->call_log().size();
    run_experiment(en_gens, ExperimentTag::EnEn, corpus, *judge, translator.get(), demos);

    std::set<std::string> translated_prompts;
    for (const auto& e : corpus.entities()) {
        for (const auto& language : corpus.languages()) {
            if (language == "en") continue;
            for (int t = 0; t < 3; ++t) {
                translated_prompts.insert(build_prompt({e.id, language, t, PromptMethod::LangPrompt},
                                                       e.canonical_name, templates));
            }
        }
    }
    std::size_t en_en_prompts = 0, lang_templates_in_en_en = 0;
    for (const auto& call : en_subject->call_log()) {
        ++en_en_prompts;
        lang_templates_in_en_en += translated_prompts.contains(call.request.last_user_content()) ? 1 : 0;
    }
    std::size_t lang_prompts_seen = 0;
    for (const auto& call : lang_subject->call_log()) {
        lang_prompts_seen += translated_prompts.contains(call.request.last_user_content()) ? 1 : 0;
    }
    const bool ok = lang_lang_translations == 0 && en_en_prompts == 27 && lang_templates_in_en_en == 0 &&
                    lang_prompts_seen == 18;
    return {ok, fmt::format("LangLang translator calls {}; EnEn subject prompts {}, LangPrompt templates among "
                            "them {} (LangPrompt run used {})",
                            lang_lang_translations, en_en_prompts, lang_templates_in_en_en, lang_prompts_seen)};
}

class FixedIdentifier : public LanguageIdentifier {
public:
    LanguageGuess identify(std::string_view) const override { return {"en", 1.0}; }
};

std::string numbered_words(int n) {
    std::string out;
    for (int i = 0; i < n; ++i) out += fmt::format("word{}{} ", static_cast<char>('a' + i % 26), i / 26);
    return out;
}

std::vector<std::string> held_out_units(const KnowledgeDoc& doc) {
    if (doc.language != "th") return sentence_texts(doc.text);
    // Thai has no sentence terminator; use space-separated clauses instead.
    std::vector<std::string> out;
    std::string current;
    for (char c : doc.text + " ") {
        if (c == ' ') {
            if (current.size() > 30) out.push_back(current);
            current.clear();
        } else {
            current += c;
        }
    }
    return out;
}

Outcome sanity_boundary() {
    const FixedIdentifier english;
    const bool at = check(numbered_words(20), "en", english).passed;
    const bool below = check(numbered_words(19), "en", english).passed;

    const auto corpus = load_corpus_dir(testing::fixtures() / "corpus");
    const auto trained = NgramLanguageIdentifier::train(corpus.texts_by_language());
    std::string junk;
    for (int i = 0; i < 50; ++i) junk += "bonjour ";
    const auto junk_report = check(junk, "fr", trained);
    const bool junk_ok = !junk_report.passed &&
                         std::ranges::find(junk_report.reasons, SanityReason::TooFewDistinctWords) !=
                             junk_report.reasons.end();

    std::map<std::string, std::pair<int, int>> tally;
    for (const auto& held : corpus.entities()) {
        std::map<std::string, std::vector<std::string>> train;
        for (const auto& d : corpus.docs()) {
            if (d.entity_id != held.id) train[d.language].push_back(d.text);
        }
        const auto id = NgramLanguageIdentifier::train(train);
        for (const auto& d : corpus.docs()) {
            if (d.entity_id != held.id) continue;
            for (const auto& unit : held_out_units(d)) {
                auto& [hits, total] = tally[d.language];
                hits += id.identify(unit).code == d.language ? 1 : 0;
                ++total;
            }
        }
    }
    bool accuracy_ok = tally.size() == 7;
    std::string accuracies;
    for (const auto& [lang, counts] : tally) {
        const double accuracy = static_cast<double>(counts.first) / counts.second;
        const double required = (lang == "zh" || lang == "ja" || lang == "th") ? kCjkThaiAccuracy : kLatinAccuracy;
        accuracy_ok = accuracy_ok && accuracy >= required;
        accuracies += fmt::format(" {} {:.3f}", lang, accuracy);
    }
    return {at && !below && junk_ok && accuracy_ok,
            fmt::format("20 distinct {}, 19 distinct {}, repeated word {}; held-out accuracy{}",
                        at ? "pass" : "fail", below ? "pass" : "fail", junk_ok ? "rejected" : "accepted",
                        accuracies)};
}

FactVerdict predicted(std::string fact, bool supported) {
    auto v = verdict(supported);
    v.fact.text = std::move(fact);
    return v;
}

Outcome validator() {
    const std::vector<HumanAnnotatedFact> gold{
        {"r1", "a", true}, {"r1", "b", true}, {"r1", "c", false}, {"r1", "d", false}};
    const std::vector<PredictedResponse> perfect{
        {"r1", {predicted("a", true), predicted("b", true), predicted("c", false), predicted("d", false)}}};
    const auto p = validator_metrics(perfect, gold);

    // TP 1, FP 2, FN 1: precision 1/3, recall 1/2, F1 40.
    const std::vector<PredictedResponse> hand{
        {"r1", {predicted("a", true), predicted("b", false), predicted("c", true), predicted("d", true)}}};
    const auto h = validator_metrics(hand, gold);

    std::vector<HumanAnnotatedFact> uniform;
    std::vector<PredictedResponse> never;
    for (int r = 0; r < 50; ++r) {
        const auto id = "r" + std::to_string(r);
        PredictedResponse resp{id, {}};
        for (int f = 0; f < 50; ++f) {
            const auto text = "fact " + std::to_string(f);
            uniform.push_back({id, text, (f + r) % 50 < 21});
            resp.verdicts.push_back(predicted(text, false));
        }
        never.push_back(std::move(resp));
    }
    const auto baseline = validator_metrics(never, uniform);

    const bool ok = p.error_rate == 0.0 && p.micro_f1 == 100.0 &&
                    std::abs(h.error_rate - 0.25) <= kMetricTolerance &&
                    std::abs(h.micro_f1 - 40.0) <= kMetricTolerance && h.true_positives == 1 &&
                    h.false_positives == 2 && h.false_negatives == 1 &&
                    std::abs(baseline.error_rate - 0.42) <= kMetricTolerance;
    return {ok, fmt::format("perfect ({}, {}); hand case ER {:.4f} F1 {:.2f}; always-not-supported ER {:.4f}",
                            p.error_rate, p.micro_f1, h.error_rate, h.micro_f1, baseline.error_rate)};
}

Outcome audit_identity() {
    const fs::path data = FACTGAP_DATA;
    const auto corpus = load_corpus_dir(testing::fixtures() / "corpus");
    const auto demos = load_demonstrations(data / "demos.jsonl");
    auto judge = fixture_gateway("judge", testing::fixtures() / "e2e" / "judge_rules.jsonl", 0.0);
    const auto records = audit_knowledge(corpus, "en", nullptr, *judge, demos);
    std::size_t perfect = 0;
    for (const auto& r : records) perfect += r.result.score == 1.0 ? 1 : 0;
    return {!records.empty() && perfect == records.size() && records.size() == corpus.entities().size(),
            fmt::format("{}/{} entities score 1.0", perfect, records.size())};
}

Outcome live_run_config() {
    const auto config = RunConfig::load(fs::path(FACTGAP_DATA) / "live-run.json");
    std::size_t http = 0;
    for (const auto& [name, b] : config.backends) http += b.kind == BackendKind::Http ? 1 : 0;
    const bool ok = http == config.backends.size() && config.backends.contains(config.lm_eval) &&
                    config.backends.contains(config.translator);
    return {ok, fmt::format("headline numbers need live endpoints and are not checked here; live-run config "
                            "has {} http backends",
                            http)};
}

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::warn);
    Suite suite;
    suite.run("factscore-oracle", kScoreBudget, score_oracle);
    suite.run("bm25-oracle", kBm25Budget, bm25_oracle);
    suite.run("end-to-end-determinism", kPipelineBudget, end_to_end);
    suite.run("mode-contracts", kNoBudget, mode_contracts);
    suite.run("sanity-boundary", kNoBudget, sanity_boundary);
    suite.run("validator-metrics", kNoBudget, validator);
    suite.run("audit-identity", kNoBudget, audit_identity);
    suite.run("live-run-shape", kNoBudget, live_run_config);
    return suite.failures() == 0 ? 0 : 1;
}
