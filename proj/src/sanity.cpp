#include "factgap/sanity.h"

#include <algorithm>
#include <set>

#include <unicode/uchar.h>
#include <unicode/utf8.h>
#include <spdlog/spdlog.h>

#include "factgap/errors.h"
#include "factgap/io.h"
#include "factgap/retrieval.h"
#include "factgap/strings.h"

namespace factgap {

namespace {

constexpr std::string_view kBoundary = "_";

bool is_letter(UChar32 c) {
    return u_hasBinaryProperty(c, UCHAR_ALPHABETIC) || (U_GET_GC_MASK(c) & U_GC_M_MASK) != 0;
}

std::string encode(UChar32 c) {
    char buf[U8_MAX_LENGTH];
    int32_t len = 0;
    UBool error = false;
    U8_APPEND(reinterpret_cast<uint8_t*>(buf), len, U8_MAX_LENGTH, c, error);
    return error ? std::string() : std::string(buf, static_cast<std::size_t>(len));
}

std::unordered_map<std::string, std::size_t> count_ngrams(std::string_view text, std::size_t max_n) {
    std::unordered_map<std::string, std::size_t> counts;
    std::vector<std::string> word{std::string(kBoundary)};
    auto flush = [&] {
        if (word.size() == 1) return;
        word.emplace_back(kBoundary);
        for (std::size_t n = 1; n <= max_n; ++n) {
            for (std::size_t i = 0; i + n <= word.size(); ++i) {
                if (n == 1 && (i == 0 || i + 1 == word.size())) continue;
                std::string gram;
                for (std::size_t j = i; j < i + n; ++j) gram += word[j];
                ++counts[gram];
            }
        }
        word.resize(1);
    };
    const auto* bytes = reinterpret_cast<const uint8_t*>(text.data());
    const auto length = static_cast<int32_t>(text.size());
    int32_t i = 0;
    while (i < length) {
        UChar32 c;
        U8_NEXT(bytes, i, length, c);
        if (c >= 0 && is_letter(c)) {
            word.push_back(encode(u_foldCase(c, U_FOLD_CASE_DEFAULT)));
        } else {
            flush();
        }
    }
    flush();
    return counts;
}

std::vector<std::string> rank_ngrams(const std::unordered_map<std::string, std::size_t>& counts,
                                     std::size_t limit) {
    std::vector<std::pair<std::string, std::size_t>> items(counts.begin(), counts.end());
    std::ranges::sort(items, [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (items.size() > limit) items.resize(limit);
    std::vector<std::string> out;
    out.reserve(items.size());
    for (auto& [gram, _] : items) out.push_back(std::move(gram));
    return out;
}

}  // namespace

NgramLanguageIdentifier NgramLanguageIdentifier::train(
    const std::map<std::string, std::vector<std::string>>& texts, const NgramProfileOptions& options) {
    NgramLanguageIdentifier id;
    id.options_ = options;
    for (const auto& [code, docs] : texts) {
        std::unordered_map<std::string, std::size_t> counts;
        for (const auto& doc : docs) {
            for (const auto& [gram, n] : count_ngrams(doc, options.max_n)) counts[gram] += n;
        }
        if (counts.empty()) continue;
        auto ranked = rank_ngrams(counts, options.profile_size);
        auto& ranks = id.ranks_[code];
        for (std::size_t r = 0; r < ranked.size(); ++r) ranks.emplace(ranked[r], r);
        id.ranked_[code] = std::move(ranked);
    }
    return id;
}

std::vector<std::string> NgramLanguageIdentifier::profile_of(std::string_view text) const {
    return rank_ngrams(count_ngrams(text, options_.max_n), options_.profile_size);
}

std::vector<std::pair<std::string, double>> NgramLanguageIdentifier::distances(
    std::string_view text) const {
    const auto doc = profile_of(text);
    const auto max_penalty = static_cast<double>(options_.profile_size);
    std::vector<std::pair<std::string, double>> out;
    for (const auto& [code, ranks] : ranks_) {
        if (doc.empty()) {
            out.emplace_back(code, 1.0);
            continue;
        }
        double total = 0.0;
        for (std::size_t r = 0; r < doc.size(); ++r) {
            auto it = ranks.find(doc[r]);
            total += it == ranks.end()
                         ? max_penalty
                         : static_cast<double>(r > it->second ? r - it->second : it->second - r);
        }
        out.emplace_back(code, total / (static_cast<double>(doc.size()) * max_penalty));
    }
    return out;
}

LanguageGuess NgramLanguageIdentifier::identify(std::string_view text) const {
    auto dist = distances(text);
    if (dist.empty()) return {std::string(kOtherLanguage), 0.0};
    std::ranges::stable_sort(dist, {}, &std::pair<std::string, double>::second);
    const double best = 1.0 - dist[0].second;
    const double second = dist.size() > 1 ? 1.0 - dist[1].second : 0.0;
    const double confidence = best > 0.0 ? (best - second) / best : 0.0;
    if (confidence < options_.confidence_margin) {
        return {std::string(kOtherLanguage), confidence};
    }
    return {dist[0].first, confidence};
}

std::vector<std::string> NgramLanguageIdentifier::languages() const {
    std::vector<std::string> out;
    for (const auto& [code, _] : ranked_) out.push_back(code);
    return out;
}

std::string NgramLanguageIdentifier::serialize() const {
    json j{{"options",
            {{"max_n", options_.max_n},
             {"profile_size", options_.profile_size},
             {"confidence_margin", options_.confidence_margin}}},
           {"profiles", ranked_}};
    return j.dump();
}

NgramLanguageIdentifier NgramLanguageIdentifier::deserialize(std::string_view data) {
    const auto j = json::parse(data);
    NgramLanguageIdentifier id;
    const auto& o = j.at("options");
    id.options_.max_n = o.at("max_n").get<std::size_t>();
    id.options_.profile_size = o.at("profile_size").get<std::size_t>();
    id.options_.confidence_margin = o.at("confidence_margin").get<double>();
    id.ranked_ = j.at("profiles").get<std::map<std::string, std::vector<std::string>>>();
    for (const auto& [code, ranked] : id.ranked_) {
        auto& ranks = id.ranks_[code];
        for (std::size_t r = 0; r < ranked.size(); ++r) ranks.emplace(ranked[r], r);
    }
    return id;
}

NgramLanguageIdentifier load_or_train_identifier(
    const std::map<std::string, std::vector<std::string>>& texts, const std::string& corpus_digest,
    const std::filesystem::path& cache_path, const NgramProfileOptions& options) {
    std::error_code ec;
    if (std::filesystem::exists(cache_path, ec)) {
        try {
            const auto j = json::parse(read_file(cache_path));
            if (j.at("corpus_digest").get<std::string>() == corpus_digest) {
                auto id = NgramLanguageIdentifier::deserialize(j.at("identifier").dump());
                const auto& o = id.options();
                if (o.max_n == options.max_n && o.profile_size == options.profile_size &&
                    o.confidence_margin == options.confidence_margin) {
                    return id;
                }
            }
        } catch (const std::exception& e) {
            spdlog::warn("ignoring profile cache {}: {}", cache_path.string(), e.what());
        }
    }
    auto id = NgramLanguageIdentifier::train(texts, options);
    json j{{"corpus_digest", corpus_digest}, {"identifier", json::parse(id.serialize())}};
    write_file_atomic(cache_path, j.dump());
    return id;
}

LanguageGuess identify_language(const LanguageIdentifier& identifier, std::string_view text) {
    if (trim_view(text).empty()) {
        throw PreconditionError("identify_language: empty text");
    }
    return identifier.identify(text);
}

std::string_view to_string(SanityReason reason) {
    return reason == SanityReason::WrongLanguage ? "wrong_language" : "too_few_distinct_words";
}

SanityReason parse_sanity_reason(std::string_view text) {
    if (text == "wrong_language") return SanityReason::WrongLanguage;
    if (text == "too_few_distinct_words") return SanityReason::TooFewDistinctWords;
    throw ValidationError("unknown sanity reason '" + std::string(text) + "'");
}

std::size_t distinct_word_count(std::string_view text, std::string_view language) {
    const auto tokens = tokenize(text, language);
    return std::set<std::string>(tokens.begin(), tokens.end()).size();
}

SanityReport check(std::string_view response, std::string_view target,
                   const LanguageIdentifier& identifier, const SanityOptions& options) {
    SanityReport report;
    if (trim_view(response).empty()) {
        report.detected_language = std::string(kOtherLanguage);
    } else {
        auto guess = identifier.identify(response);
        report.detected_language = std::move(guess.code);
        report.confidence = guess.confidence;
    }
    report.distinct_words = distinct_word_count(response, target);
    if (report.detected_language != target) {
        report.reasons.push_back(SanityReason::WrongLanguage);
    }
    if (report.distinct_words < options.distinct_word_min) {
        report.reasons.push_back(SanityReason::TooFewDistinctWords);
    }
    report.passed = report.reasons.empty();
    return report;
}

}  // namespace factgap
