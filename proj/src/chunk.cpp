#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include "factgap/errors.h"
#include "factgap/retrieval.h"

namespace factgap {

namespace {

struct CodePoint {
    UChar32 value;
    std::size_t begin;
    std::size_t end;
};

std::vector<CodePoint> decode(std::string_view text) {
    std::vector<CodePoint> out;
    out.reserve(text.size());
    const auto* bytes = reinterpret_cast<const uint8_t*>(text.data());
    const auto length = static_cast<int32_t>(text.size());
    int32_t i = 0;
    while (i < length) {
        const auto start = static_cast<std::size_t>(i);
        UChar32 c;
        U8_NEXT(bytes, i, length, c);
        out.push_back({c, start, static_cast<std::size_t>(i)});
    }
    return out;
}

bool is_space(UChar32 c) { return c >= 0 && u_isUWhiteSpace(c); }

bool is_terminator(UChar32 c) {
    return c == U'.' || c == U'!' || c == U'?' || c == U'؟' || c == U'।';
}

bool is_fullwidth_terminator(UChar32 c) { return c == U'。' || c == U'！' || c == U'？'; }

bool is_closer(UChar32 c) {
    switch (c) {
        case U'"': case U'\'': case U')': case U']': case U'}': case U'»':
        case U'”': case U'’': case U'」': case U'』': case U'）': case U'】':
            return true;
        default:
            return false;
    }
}

void push_trimmed(std::vector<TextSpan>& out, const std::vector<CodePoint>& cps,
                  std::size_t first, std::size_t last) {
    while (first < last && is_space(cps[first].value)) ++first;
    while (last > first && is_space(cps[last - 1].value)) --last;
    if (first < last) {
        out.push_back({cps[first].begin, cps[last - 1].end});
    }
}

}  // namespace

std::vector<TextSpan> split_sentences(std::string_view text) {
    const auto cps = decode(text);
    std::vector<TextSpan> out;
    std::size_t start = 0;
    std::size_t i = 0;
    while (i < cps.size()) {
        const UChar32 c = cps[i].value;
        const bool fullwidth = is_fullwidth_terminator(c);
        if (!fullwidth && !is_terminator(c)) {
            ++i;
            continue;
        }
        std::size_t j = i + 1;
        while (j < cps.size() &&
               (is_terminator(cps[j].value) || is_fullwidth_terminator(cps[j].value) ||
                is_closer(cps[j].value))) {
            ++j;
        }
        if (fullwidth || j == cps.size() || is_space(cps[j].value)) {
            push_trimmed(out, cps, start, j);
            start = j;
        }
        i = j;
    }
    push_trimmed(out, cps, start, cps.size());
    return out;
}

std::vector<std::string> sentence_texts(std::string_view text) {
    std::vector<std::string> out;
    for (const auto& span : split_sentences(text)) {
        out.emplace_back(text.substr(span.begin, span.size()));
    }
    return out;
}

std::vector<Passage> chunk(const KnowledgeDoc& doc, std::size_t max_tokens) {
    if (max_tokens < kMinChunkTokens) {
        throw PreconditionError("chunk: max_tokens must be at least " +
                                std::to_string(kMinChunkTokens));
    }
    struct Group {
        TextSpan span;
        std::size_t tokens = 0;
    };
    std::vector<Group> groups;
    bool open = false;
    for (const auto& sentence : split_sentences(doc.text)) {
        const auto tokens =
            tokenize(std::string_view(doc.text).substr(sentence.begin, sentence.size()),
                     doc.language)
                .size();
        if (open && (groups.back().tokens + tokens <= max_tokens || tokens == 0 ||
                     groups.back().tokens == 0)) {
            groups.back().span.end = sentence.end;
            groups.back().tokens += tokens;
        } else {
            groups.push_back({sentence, tokens});
            open = true;
        }
    }
    // A token-free tail (stray punctuation) belongs to the previous passage.
    if (groups.size() > 1 && groups.back().tokens == 0) {
        groups[groups.size() - 2].span.end = groups.back().span.end;
        groups.pop_back();
    }
    std::vector<Passage> passages;
    for (const auto& g : groups) {
        if (g.tokens == 0) continue;
        Passage p;
        p.doc_key = doc.key();
        p.index = passages.size();
        p.text = doc.text.substr(g.span.begin, g.span.size());
        p.token_count = g.tokens;
        p.span = g.span;
        passages.push_back(std::move(p));
    }
    return passages;
}

}  // namespace factgap
