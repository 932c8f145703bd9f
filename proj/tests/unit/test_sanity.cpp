#include <doctest.h>

#include <map>

#include "factgap/corpus.h"
#include "factgap/errors.h"
#include "factgap/retrieval.h"
#include "factgap/sanity.h"
#include "test_support.h"

using namespace factgap;

namespace {

class FixedIdentifier : public LanguageIdentifier {
public:
    explicit FixedIdentifier(std::string code) : code_(std::move(code)) {}
    LanguageGuess identify(std::string_view) const override { return {code_, 1.0}; }

private:
    std::string code_;
};

std::string numbered_words(int n, const std::string& stem = "word") {
    std::string out;
    for (int i = 0; i < n; ++i) out += stem + static_cast<char>('a' + i % 26) + static_cast<char>('a' + i / 26) + " ";
    return out;
}

const Corpus& fixture_corpus() {
    static const Corpus corpus = load_corpus_dir(testing::fixtures() / "corpus");
    return corpus;
}

// Latin to Cyrillic, letter by letter.
std::string to_cyrillic(std::string_view text) {
    static const std::map<char, std::string> table{
        {'a', "а"}, {'b', "б"}, {'c', "ц"}, {'d', "д"}, {'e', "е"}, {'f', "ф"}, {'g', "г"},
        {'h', "х"}, {'i', "и"}, {'j', "й"}, {'k', "к"}, {'l', "л"}, {'m', "м"}, {'n', "н"},
        {'o', "о"}, {'p', "п"}, {'q', "к"}, {'r', "р"}, {'s', "с"}, {'t', "т"}, {'u', "у"},
        {'v', "в"}, {'w', "в"}, {'x', "кс"}, {'y', "ы"}, {'z', "з"}};
    std::string out;
    for (char c : text) {
        const char lower = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        auto it = table.find(lower);
        out += it == table.end() ? std::string(1, c) : it->second;
    }
    return out;
}

// Held-out units: sentences, or whitespace-separated clauses for Thai.
std::vector<std::string> held_out_units(const KnowledgeDoc& doc) {
    if (doc.language != "th") return sentence_texts(doc.text);
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

}  // namespace

TEST_CASE("distinct_word_count") {
    CHECK(distinct_word_count("a a a a", "en") == 1);
    CHECK(distinct_word_count("", "en") == 0);
    CHECK(distinct_word_count(numbered_words(25), "en") == 25);
    CHECK(distinct_word_count("居里夫人居里", "zh") == 4);
}

TEST_CASE("distinct word threshold boundary") {
    const FixedIdentifier english("en");
    const auto at = check(numbered_words(20), "en", english);
    CHECK(at.distinct_words == 20);
    CHECK(at.passed);
    CHECK(at.reasons.empty());
    const auto below = check(numbered_words(19), "en", english);
    CHECK(below.distinct_words == 19);
    CHECK_FALSE(below.passed);
    CHECK(below.reasons == std::vector<SanityReason>{SanityReason::TooFewDistinctWords});
}

TEST_CASE("check with trained profiles") {
    const auto id = NgramLanguageIdentifier::train(fixture_corpus().texts_by_language());
    const auto en_doc = fixture_corpus().find_doc("alan_turing", "en")->text;

    const auto english = check(en_doc, "en", id);
    CHECK(english.passed);
    CHECK(english.detected_language == "en");

    std::string bonjour;
    for (int i = 0; i < 50; ++i) bonjour += "bonjour ";
    const auto junk = check(bonjour, "fr", id);
    CHECK_FALSE(junk.passed);
    CHECK(junk.distinct_words == 1);
    CHECK(std::find(junk.reasons.begin(), junk.reasons.end(), SanityReason::TooFewDistinctWords) !=
          junk.reasons.end());

    const auto wrong = check(en_doc, "sw", id);
    CHECK_FALSE(wrong.passed);
    CHECK(wrong.reasons == std::vector<SanityReason>{SanityReason::WrongLanguage});

    const auto blank = check("", "en", id);
    CHECK_FALSE(blank.passed);
    CHECK(blank.detected_language == "other");

    CHECK(check(en_doc, "en", id).confidence == english.confidence);
}

TEST_CASE("in-distribution paragraph and unseen script") {
    const auto id = NgramLanguageIdentifier::train(fixture_corpus().texts_by_language());
    const auto paragraph = fixture_corpus().find_doc("marie_curie", "en")->text.substr(0, 200);
    const auto guess = identify_language(id, paragraph);
    CHECK(guess.code == "en");
    CHECK(guess.confidence > id.options().confidence_margin);

    const auto foreign = identify_language(id, to_cyrillic(paragraph));
    CHECK(foreign.code == "other");
    CHECK(foreign.confidence < id.options().confidence_margin);

    CHECK_THROWS_AS(identify_language(id, "   "), PreconditionError);
}

TEST_CASE("held-out accuracy, one entity left out at a time") {
    const auto& corpus = fixture_corpus();
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
    for (const auto& [lang, counts] : tally) {
        const double accuracy = static_cast<double>(counts.first) / counts.second;
        const double required = (lang == "zh" || lang == "ja" || lang == "th") ? 0.80 : 0.95;
        INFO(lang << ": " << counts.first << "/" << counts.second);
        CHECK(counts.second >= 40);
        CHECK(accuracy >= required);
    }
    CHECK(tally.size() == 7);
}

TEST_CASE("profile serialization and cache") {
    const auto texts = fixture_corpus().texts_by_language();
    const auto id = NgramLanguageIdentifier::train(texts);
    const auto copy = NgramLanguageIdentifier::deserialize(id.serialize());
    const std::string probe = "Elle est née à Varsovie et a étudié à Paris.";
    CHECK(copy.distances(probe) == id.distances(probe));
    CHECK(copy.languages() == id.languages());

    testing::TempDir dir;
    const auto path = dir / "profiles.json";
    const auto first = load_or_train_identifier(texts, "digest-a", path);
    CHECK(std::filesystem::exists(path));
    const auto second = load_or_train_identifier(texts, "digest-a", path);
    CHECK(second.serialize() == first.serialize());

    // A different digest retrains instead of trusting the stale file.
    std::map<std::string, std::vector<std::string>> english_only{{"en", texts.at("en")}};
    const auto retrained = load_or_train_identifier(english_only, "digest-b", path);
    CHECK(retrained.languages() == std::vector<std::string>{"en"});
}

TEST_CASE("reason names") {
    CHECK(to_string(SanityReason::WrongLanguage) == "wrong_language");
    CHECK(parse_sanity_reason("too_few_distinct_words") == SanityReason::TooFewDistinctWords);
}
