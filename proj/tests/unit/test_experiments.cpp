#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "factgap/corpus.h"
#include "factgap/errors.h"
#include "factgap/experiments.h"
#include "factgap/language.h"
#include "test_support.h"

using namespace factgap;

namespace {

std::filesystem::path e2e() { return testing::fixtures() / "e2e"; }

TemplateTable bundled_templates() {
    return TemplateTable::load(std::filesystem::path(FACTGAP_DATA) / "templates.jsonl");
}

struct Fixture {
    Corpus corpus = load_corpus_dir(e2e() / "corpus");
    TemplateTable templates = bundled_templates();
    NgramLanguageIdentifier identifier = NgramLanguageIdentifier::train(corpus.texts_by_language());
    std::vector<Demonstration> demos = load_demonstrations(std::filesystem::path(FACTGAP_DATA) / "demos.jsonl");
    std::shared_ptr<ResponseCache> cache;

    explicit Fixture(const std::filesystem::path& cache_dir)
        : cache(std::make_shared<ResponseCache>(cache_dir)) {}

    std::unique_ptr<Gateway> gateway(const std::string& name, const std::filesystem::path& rules,
                                     double temperature, bool cached = true) {
        return std::make_unique<Gateway>(
            name, std::make_shared<FixtureBackend>(name, std::nullopt, rules),
            cached ? cache : nullptr, ModelSettings{"fixture-" + name, temperature, 1024, {}});
    }
    std::unique_ptr<Gateway> subject() { return gateway("subject", e2e() / "subject" / "rules.jsonl", 0.7); }
    std::unique_ptr<Gateway> judge() { return gateway("judge", e2e() / "judge_rules.jsonl", 0.0); }
    std::unique_ptr<Gateway> translator() {
        return gateway("translator", e2e() / "translator" / "rules.jsonl", 0.0);
    }
};

ResponseScore scored(int template_id, double value, std::size_t facts) {
    ResponseScore r;
    r.spec = {"e", "fr", template_id, PromptMethod::LangPrompt};
    r.model = "m";
    r.result.score = value;
    r.result.num_facts = facts;
    return r;
}

std::string dump_scores(const ExperimentResult& r) {
    std::string out;
    for (const auto& s : r.scores) out += to_json(s).dump() + "\n";
    return out;
}

}  // namespace

TEST_CASE("build_prompt") {
    const auto table = bundled_templates();
    CHECK(build_prompt({"einstein", "fr", 1, PromptMethod::EnPrompt}, "Albert Einstein", table) ==
          "Give me a biography of Albert Einstein in French");
    CHECK(build_prompt({"einstein", "fr", 1, PromptMethod::LangPrompt}, "Albert Einstein", table) ==
          "Donne-moi une biographie de Albert Einstein en Français.");
    CHECK(build_prompt({"x", "en", 0, PromptMethod::LangPrompt}, "X", table) ==
          "Tell me a biography of X in English");
    CHECK(build_prompt({"x", "en", 2, PromptMethod::EnPrompt}, "X", table) ==
          "Please give me a biography of X in English");
    CHECK_THROWS_AS(build_prompt({"x", "fr", 0, PromptMethod::LangPrompt}, "X", TemplateTable{}),
                    ValidationError);
    CHECK_THROWS_AS(build_prompt({"x", "fr", 3, PromptMethod::EnPrompt}, "X", table), ValidationError);
}

TEST_CASE("bundled template table covers every non-English language") {
    const auto table = bundled_templates();
    CHECK(table.size() == 18 * 3);
    for (const auto& l : language_table()) {
        if (l.code == "en") continue;
        for (int t = 0; t < 3; ++t) {
            const auto* text = table.find(l.code, t);
            REQUIRE(text != nullptr);
            CHECK(text->find("{}") != std::string::npos);
        }
    }
}

TEST_CASE("template folding") {
    const std::vector<ResponseScore> three{scored(0, 0.5, 10), scored(1, 0.7, 20), scored(2, 0.9, 30)};
    const auto s = fold_templates("e", "fr", "m", ExperimentTag::LangLang, three);
    CHECK(s.mean == doctest::Approx(0.7).epsilon(1e-12));
    // sqrt(((0.5-0.7)^2 + 0 + (0.9-0.7)^2) / 3)
    CHECK(s.std_dev == doctest::Approx(std::sqrt(0.08 / 3.0)).epsilon(1e-12));
    CHECK(s.std_dev == doctest::Approx(0.16330).epsilon(1e-4));
    CHECK(s.mean_num_facts == doctest::Approx(20.0));
    CHECK(s.n_templates_scored == 3);

    const std::vector<ResponseScore> one{scored(1, 0.4, 12)};
    const auto single = fold_templates("e", "fr", "m", ExperimentTag::LangLang, one);
    CHECK(single.mean == doctest::Approx(0.4));
    CHECK(single.std_dev == 0.0);
    CHECK(single.n_templates_scored == 1);
    CHECK_FALSE(single.per_template_scores[0].has_value());
    CHECK(single.per_template_scores[1] == 0.4);

    const auto none = fold_templates("e", "fr", "m", ExperimentTag::LangLang, {});
    CHECK(none.n_templates_scored == 0);

    const auto round = entity_score_from_json(to_json(s));
    CHECK(to_json(round) == to_json(s));
}

TEST_CASE("mode wiring") {
    const auto ll = ExperimentMode::of(ExperimentTag::LangLang);
    CHECK(ll.prompt_method == PromptMethod::LangPrompt);
    CHECK_FALSE(ll.translate_response);
    CHECK(ll.knowledge_language("fr") == "fr");
    const auto le = ExperimentMode::of(ExperimentTag::LangEn);
    CHECK(le.prompt_method == PromptMethod::LangPrompt);
    CHECK(le.translate_response);
    CHECK(le.knowledge_language("fr") == "en");
    const auto ee = ExperimentMode::of(ExperimentTag::EnEn);
    CHECK(ee.prompt_method == PromptMethod::EnPrompt);
    CHECK(ee.translate_response);
    CHECK(ee.knowledge_language("zh") == "en");
    CHECK(parse_experiment_tag("lang-en") == ExperimentTag::LangEn);
    CHECK_THROWS_AS(parse_experiment_tag("en-lang"), ValidationError);
}

TEST_CASE("run_generation") {
    testing::TempDir dir;
    Fixture fx(dir.path());
    auto subject = fx.subject();

    SUBCASE("cardinality, junk and warm cache") {
        GenerationOptions options;
        options.languages = {"en", "fr"};
        const Corpus two({{"alan_turing", "Alan Turing"}, {"marie_curie", "Marie Curie"}},
                         {*fx.corpus.find_doc("alan_turing", "en"), *fx.corpus.find_doc("alan_turing", "fr"),
                          *fx.corpus.find_doc("marie_curie", "en"), *fx.corpus.find_doc("marie_curie", "fr")});
        const auto gens = run_generation(two, PromptMethod::LangPrompt, *subject, fx.templates,
                                         fx.identifier, options);
        CHECK(gens.size() == 12);
        CHECK(std::is_sorted(gens.begin(), gens.end(),
                             [](const auto& a, const auto& b) { return a.spec < b.spec; }));
        const auto junk = std::find_if(gens.begin(), gens.end(), [](const Generation& g) {
            return g.spec.entity_id == "alan_turing" && g.spec.language == "fr" && g.spec.template_id == 2;
        });
        REQUIRE(junk != gens.end());
        CHECK_FALSE(junk->sanity.passed);
        CHECK(junk->sanity.distinct_words == 1);
        for (const auto& g : gens) {
            if (&g != &*junk) CHECK(g.sanity.passed);
        }
        CHECK(subject->backend_calls() == 12);

        auto warm = fx.subject();
        const auto again = run_generation(two, PromptMethod::LangPrompt, *warm, fx.templates,
                                          fx.identifier, options);
        CHECK(warm->backend_calls() == 0);
        REQUIRE(again.size() == gens.size());
        for (std::size_t i = 0; i < gens.size(); ++i) CHECK(to_json(again[i]) == to_json(gens[i]));
    }
    SUBCASE("gateway failures become failed records") {
        testing::TempDir rules_dir;
        testing::write_text(rules_dir / "rules.jsonl", R"({"pattern": "Marie Curie", "reply": "x"})" "\n");
        auto broken = fx.gateway("broken", rules_dir / "rules.jsonl", 0.7, false);
        GenerationOptions options;
        options.languages = {"en"};
        const auto gens =
            run_generation(fx.corpus, PromptMethod::EnPrompt, *broken, fx.templates, fx.identifier, options);
        CHECK(gens.size() == 9);
        std::size_t failed = 0;
        for (const auto& g : gens) {
            if (g.error) {
                ++failed;
                CHECK_FALSE(g.scorable());
                CHECK(g.error->find("404") != std::string::npos);
            }
        }
        CHECK(failed == 6);
        CHECK(generation_from_json(to_json(gens[0])).spec == gens[0].spec);
    }
}

TEST_CASE("run_experiment mode contracts and folding") {
    testing::TempDir dir;
    Fixture fx(dir.path());
    auto subject = fx.subject();
    const auto lang_gens =
        run_generation(fx.corpus, PromptMethod::LangPrompt, *subject, fx.templates, fx.identifier);
    const auto en_gens =
        run_generation(fx.corpus, PromptMethod::EnPrompt, *subject, fx.templates, fx.identifier);
    REQUIRE(lang_gens.size() == 27);

    SUBCASE("LangLang issues no translator calls") {
        auto judge = fx.judge();
        auto translator = fx.translator();
        const auto r = run_experiment(lang_gens, ExperimentTag::LangLang, fx.corpus, *judge,
                                      translator.get(), fx.demos);
        CHECK(translator->call_log().empty());
        CHECK(r.responses.size() == 26);
        CHECK(r.scores.size() == 9);
        for (const auto& resp : r.responses) {
            CHECK(resp.mode == ExperimentTag::LangLang);
            for (const auto& v : resp.verdicts) {
                for (const auto& p : v.passages) CHECK(p.passage.doc_key.language == resp.spec.language);
            }
        }
        // Cardinality: one row per (entity, language) with a sane generation.
        std::size_t with_scores = 0;
        for (const auto& s : r.scores) with_scores += s.n_templates_scored > 0;
        CHECK(with_scores == 9);
    }
    SUBCASE("LangEn translates non-English responses and judges against English") {
        auto judge = fx.judge();
        auto translator = fx.translator();
        const auto r = run_experiment(lang_gens, ExperimentTag::LangEn, fx.corpus, *judge,
                                      translator.get(), fx.demos);
        // 26 sane responses, 8 of them English.
        CHECK(translator->call_log().size() == 17);
        for (const auto& resp : r.responses) {
            for (const auto& v : resp.verdicts) {
                for (const auto& p : v.passages) CHECK(p.passage.doc_key.language == "en");
            }
        }
    }
    SUBCASE("EnEn only accepts English-prompted generations") {
        auto judge = fx.judge();
        auto translator = fx.translator();
        CHECK_THROWS_AS(run_experiment(lang_gens, ExperimentTag::EnEn, fx.corpus, *judge,
                                       translator.get(), fx.demos),
                        PreconditionError);
        CHECK_THROWS_AS(run_experiment(en_gens, ExperimentTag::LangLang, fx.corpus, *judge,
                                       translator.get(), fx.demos),
                        PreconditionError);
        const auto r = run_experiment(en_gens, ExperimentTag::EnEn, fx.corpus, *judge,
                                      translator.get(), fx.demos);
        CHECK(r.responses.size() == 27);
        for (const auto& resp : r.responses) CHECK(resp.spec.method == PromptMethod::EnPrompt);
    }
    SUBCASE("LangLang needs no translator at all") {
        auto judge = fx.judge();
        CHECK_NOTHROW(run_experiment(lang_gens, ExperimentTag::LangLang, fx.corpus, *judge, nullptr, fx.demos));
        CHECK_THROWS_AS(run_experiment(lang_gens, ExperimentTag::LangEn, fx.corpus, *judge, nullptr, fx.demos),
                        PreconditionError);
    }
    SUBCASE("record order does not matter and reruns are identical") {
        auto judge = fx.judge();
        const auto base = run_experiment(lang_gens, ExperimentTag::LangLang, fx.corpus, *judge, nullptr, fx.demos);
        auto shuffled = lang_gens;
        std::mt19937 rng(1);
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        auto warm = fx.judge();
        const auto again = run_experiment(shuffled, ExperimentTag::LangLang, fx.corpus, *warm, nullptr, fx.demos);
        CHECK(warm->backend_calls() == 0);
        CHECK(dump_scores(again) == dump_scores(base));
    }
}

TEST_CASE("audit_knowledge") {
    testing::TempDir dir;
    Fixture fx(dir.path());
    auto judge = fx.judge();
    const auto en = audit_knowledge(fx.corpus, "en", nullptr, *judge, fx.demos);
    REQUIRE(en.size() == 3);
    for (const auto& r : en) {
        CHECK(r.result.score == 1.0);
        CHECK(r.result.num_facts > 10);
    }

    // An entity without a French doc is skipped.
    std::vector<KnowledgeDoc> docs;
    for (const auto& d : fx.corpus.docs()) {
        if (!(d.entity_id == "frida_kahlo" && d.language == "fr")) docs.push_back(d);
    }
    const Corpus partial(fx.corpus.entities(), docs);
    auto translator = fx.translator();
    const auto fr = audit_knowledge(partial, "fr", translator.get(), *judge, fx.demos);
    CHECK(fr.size() == 2);
    for (const auto& r : fr) CHECK(r.entity_id != "frida_kahlo");
}
