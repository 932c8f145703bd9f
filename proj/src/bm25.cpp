#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "factgap/errors.h"
#include "factgap/retrieval.h"

namespace factgap {

PassageIndex PassageIndex::build(std::vector<Passage> passages) {
    if (passages.empty()) {
        throw PreconditionError("build_index: empty passage list");
    }
    PassageIndex index;
    index.passages_ = std::move(passages);
    index.lengths_.reserve(index.passages_.size());
    double total = 0.0;
    for (std::size_t i = 0; i < index.passages_.size(); ++i) {
        const auto& p = index.passages_[i];
        const auto tokens = tokenize(p.text, p.doc_key.language);
        index.lengths_.push_back(tokens.size());
        total += static_cast<double>(tokens.size());
        std::map<std::string, std::size_t> tf;
        for (const auto& t : tokens) ++tf[t];
        for (auto& [term, count] : tf) {
            index.postings_[term].push_back({i, count});
        }
    }
    index.average_length_ = total / static_cast<double>(index.passages_.size());
    return index;
}

std::size_t PassageIndex::document_frequency(const std::string& term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? 0 : it->second.size();
}

std::span<const Posting> PassageIndex::postings(const std::string& term) const {
    auto it = postings_.find(term);
    if (it == postings_.end()) return {};
    return it->second;
}

double bm25_idf(std::size_t num_passages, std::size_t document_frequency) {
    const auto n = static_cast<double>(num_passages);
    const auto df = static_cast<double>(document_frequency);
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

std::vector<ScoredPassage> retrieve(const PassageIndex& index, std::string_view query,
                                    std::string_view language, std::size_t k,
                                    const Bm25Params& params) {
    if (k == 0) {
        throw PreconditionError("retrieve: k must be at least 1");
    }
    const auto raw_terms = tokenize(query, language);
    const std::set<std::string> terms(raw_terms.begin(), raw_terms.end());

    std::vector<double> scores(index.size(), 0.0);
    const double avgdl = index.average_length();
    for (const auto& term : terms) {
        const auto postings = index.postings(term);
        if (postings.empty()) continue;
        const double idf = bm25_idf(index.size(), postings.size());
        for (const auto& posting : postings) {
            const auto tf = static_cast<double>(posting.term_frequency);
            const auto dl = static_cast<double>(index.passage_length(posting.passage));
            const double norm = params.k1 * (1.0 - params.b + params.b * dl / avgdl);
            scores[posting.passage] += idf * tf * (params.k1 + 1.0) / (tf + norm);
        }
    }

    std::vector<std::size_t> hits;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (scores[i] > 0.0) hits.push_back(i);
    }
    const auto& passages = index.passages();
    auto better = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        if (passages[a].doc_key != passages[b].doc_key) {
            return passages[a].doc_key < passages[b].doc_key;
        }
        return passages[a].index < passages[b].index;
    };
    const auto top = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(top), hits.end(),
                      better);
    hits.resize(top);

    std::vector<ScoredPassage> out;
    out.reserve(top);
    for (auto i : hits) out.push_back({passages[i], scores[i]});
    return out;
}

}  // namespace factgap
