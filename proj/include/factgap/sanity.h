#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace factgap {

inline constexpr std::string_view kOtherLanguage = "other";

struct LanguageGuess {
    std::string code;  // a supported code, or "other"
    double confidence = 0.0;
};

/// Pluggable language identification.
class LanguageIdentifier {
public:
    virtual ~LanguageIdentifier() = default;
    virtual LanguageGuess identify(std::string_view text) const = 0;
};

struct NgramProfileOptions {
    std::size_t max_n = 3;
    std::size_t profile_size = 300;
    double confidence_margin = 0.05;
};

/// Rank-order character n-gram classifier (out-of-place distance).
///
/// Text is case-folded and split into letter runs; each run is padded with a
/// boundary marker and contributes its 1..max_n-grams. A profile keeps the
/// `profile_size` most frequent n-grams. The distance between a text and a
/// language is the summed rank displacement of the text's profile entries,
/// with absent entries charged `profile_size`, normalized into [0, 1].
/// Confidence is the similarity margin between the two closest languages,
/// relative to the best similarity; below `confidence_margin` the answer is
/// "other".
class NgramLanguageIdentifier : public LanguageIdentifier {
public:
    NgramLanguageIdentifier() = default;

    static NgramLanguageIdentifier train(const std::map<std::string, std::vector<std::string>>& texts,
                                         const NgramProfileOptions& options = {});

    LanguageGuess identify(std::string_view text) const override;

    /// Normalized distance to every profiled language, sorted by code.
    std::vector<std::pair<std::string, double>> distances(std::string_view text) const;

    std::vector<std::string> languages() const;
    const NgramProfileOptions& options() const noexcept { return options_; }

    /// Persisted form: {"options": ..., "profiles": {code: [n-grams by rank]}}.
    std::string serialize() const;
    static NgramLanguageIdentifier deserialize(std::string_view data);

    /// Ranked n-grams of `text`; exposed for tests.
    std::vector<std::string> profile_of(std::string_view text) const;

private:
    NgramProfileOptions options_;
    std::map<std::string, std::unordered_map<std::string, std::size_t>> ranks_;
    std::map<std::string, std::vector<std::string>> ranked_;
};

/// Loads profiles from `cache_path` when it exists and was built from a
/// corpus with the same digest; otherwise trains and writes the cache.
NgramLanguageIdentifier load_or_train_identifier(
    const std::map<std::string, std::vector<std::string>>& texts, const std::string& corpus_digest,
    const std::filesystem::path& cache_path, const NgramProfileOptions& options = {});

/// Throws PreconditionError for blank text.
LanguageGuess identify_language(const LanguageIdentifier& identifier, std::string_view text);

enum class SanityReason { WrongLanguage, TooFewDistinctWords };

std::string_view to_string(SanityReason reason);
SanityReason parse_sanity_reason(std::string_view text);

struct SanityReport {
    std::string detected_language;
    double confidence = 0.0;
    std::size_t distinct_words = 0;
    bool passed = false;
    std::vector<SanityReason> reasons;
};

struct SanityOptions {
    std::size_t distinct_word_min = 20;
};

/// Unique tokens under the retrieval tokenizer.
std::size_t distinct_word_count(std::string_view text, std::string_view language);

/// Passes iff the detected language is `target` and there are at least
/// `distinct_word_min` distinct words.
SanityReport check(std::string_view response, std::string_view target,
                   const LanguageIdentifier& identifier, const SanityOptions& options = {});

}  // namespace factgap
