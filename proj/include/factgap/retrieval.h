#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "factgap/corpus.h"

namespace factgap {

/// Case-folded word tokens. Space-delimited scripts yield one token per run
/// of letters and digits. For zh, ja and th, runs of Han, kana or Thai
/// letters yield overlapping code-point bigrams (a lone character is kept as
/// a unigram) and digit runs are kept whole.
std::vector<std::string> tokenize(std::string_view text, std::string_view language);

/// Byte range [begin, end) into some text.
struct TextSpan {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - begin; }
    bool operator==(const TextSpan&) const = default;
};

/// Sentence spans with surrounding whitespace trimmed. A sentence ends after
/// one of . ! ? ؟ । (plus trailing closing quotes or brackets) when followed
/// by whitespace or end of text; the full-width 。！？ end a sentence
/// unconditionally.
std::vector<TextSpan> split_sentences(std::string_view text);

/// Convenience: the sentence strings themselves.
std::vector<std::string> sentence_texts(std::string_view text);

struct Passage {
    DocKey doc_key;
    std::size_t index = 0;  // ordinal within the doc
    std::string text;
    std::size_t token_count = 0;
    TextSpan span;  // location in the source doc text

    bool operator==(const Passage&) const = default;
};

inline constexpr std::size_t kMinChunkTokens = 16;

/// Packs whole sentences greedily into passages of at most `max_tokens`
/// tokens. A sentence longer than the limit becomes its own passage. A doc
/// with no tokens at all yields no passages.
std::vector<Passage> chunk(const KnowledgeDoc& doc, std::size_t max_tokens);

struct Bm25Params {
    double k1 = 1.5;
    double b = 0.75;
};

struct Posting {
    std::size_t passage = 0;
    std::size_t term_frequency = 0;
};

/// Inverted index over a fixed passage set. Immutable once built.
class PassageIndex {
public:
    /// Throws PreconditionError on an empty passage list.
    static PassageIndex build(std::vector<Passage> passages);

    std::size_t size() const noexcept { return passages_.size(); }
    const std::vector<Passage>& passages() const noexcept { return passages_; }
    std::size_t passage_length(std::size_t i) const { return lengths_.at(i); }
    double average_length() const noexcept { return average_length_; }
    std::size_t document_frequency(const std::string& term) const;
    std::span<const Posting> postings(const std::string& term) const;
    std::size_t vocabulary_size() const noexcept { return postings_.size(); }

private:
    std::vector<Passage> passages_;
    std::vector<std::size_t> lengths_;
    double average_length_ = 0.0;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
};

inline PassageIndex build_index(std::vector<Passage> passages) {
    return PassageIndex::build(std::move(passages));
}

struct ScoredPassage {
    Passage passage;
    double score = 0.0;

    bool operator==(const ScoredPassage&) const = default;
};

/// BM25 idf with the +1 inside the log, so every matching term contributes
/// a positive amount.
double bm25_idf(std::size_t num_passages, std::size_t document_frequency);

/// Top-`k` passages by BM25 score for `query`, best first. Ties go to the
/// smaller (doc_key, index). Passages scoring zero are never returned.
/// Repeated query terms count once.
std::vector<ScoredPassage> retrieve(const PassageIndex& index, std::string_view query,
                                    std::string_view language, std::size_t k,
                                    const Bm25Params& params = {});

}  // namespace factgap
