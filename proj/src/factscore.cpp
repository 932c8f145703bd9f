#include "factgap/factscore.h"

#include <cctype>
#include <cmath>

#include <spdlog/spdlog.h>

#include "factgap/errors.h"
#include "factgap/io.h"
#include "factgap/strings.h"

namespace factgap {

std::string_view to_string(ParseStatus status) {
    return status == ParseStatus::Clean ? "clean" : "fallback";
}

std::vector<Demonstration> load_demonstrations(const std::filesystem::path& path) {
    std::vector<Demonstration> demos;
    for_each_jsonl(path, [&](const json& r, std::size_t line) {
        try {
            Demonstration d{r.at("sentence").get<std::string>(),
                            r.at("facts").get<std::vector<std::string>>()};
            if (d.sentence.empty() || d.facts.empty()) {
                throw ValidationError("empty sentence or fact list");
            }
            demos.push_back(std::move(d));
        } catch (const std::exception& e) {
            throw ValidationError(path.filename().string() + ":" + std::to_string(line) + ": " +
                                  e.what());
        }
    });
    return demos;
}

std::string decomposition_prompt(std::span<const Demonstration> demos, std::string_view sentence) {
    std::string prompt;
    for (const auto& demo : demos) {
        prompt += kDecomposeInstruction;
        prompt += demo.sentence;
        prompt += '\n';
        for (const auto& fact : demo.facts) {
            prompt += "- ";
            prompt += fact;
            prompt += '\n';
        }
        prompt += '\n';
    }
    prompt += kDecomposeInstruction;
    prompt += sentence;
    return prompt;
}

std::vector<std::string> parse_fact_lines(std::string_view reply) {
    std::vector<std::string> facts;
    std::size_t pos = 0;
    while (pos <= reply.size()) {
        auto end = reply.find('\n', pos);
        if (end == std::string_view::npos) end = reply.size();
        auto line = trim_view(reply.substr(pos, end - pos));
        if (line.starts_with("- ")) {
            auto fact = trim_view(line.substr(2));
            if (!fact.empty()) facts.emplace_back(fact);
        }
        pos = end + 1;
    }
    return facts;
}

std::vector<AtomicFact> decompose(std::string_view response, std::string_view language,
                                  Gateway& lm, std::span<const Demonstration> demos) {
    if (trim_view(response).empty()) {
        throw PreconditionError("decompose: empty response");
    }
    std::vector<AtomicFact> facts;
    const auto sentences = sentence_texts(response);
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        const auto reply = lm.complete(lm.make_request(decomposition_prompt(demos, sentences[i])));
        const auto parsed = parse_fact_lines(reply.text);
        if (parsed.empty()) {
            spdlog::warn("decompose ({}): no facts parsed for sentence {}", language, i);
        }
        for (const auto& text : parsed) {
            facts.push_back({text, i});
        }
    }
    return facts;
}

std::string judge_prompt(std::span<const ScoredPassage> passages, std::string_view fact) {
    std::string prompt;
    for (std::size_t i = 0; i < passages.size(); ++i) {
        if (i > 0) prompt += "\n\n";
        prompt += passages[i].passage.text;
    }
    prompt += "\n\nInput: ";
    prompt += fact;
    prompt += " True or False?\nOutput:";
    return prompt;
}

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

}  // namespace

ParsedVerdict parse_verdict(std::string_view raw) {
    std::string lower(raw);
    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (std::size_t i = 0; i < lower.size(); ++i) {
        if (i > 0 && is_word_byte(static_cast<unsigned char>(lower[i - 1]))) continue;
        for (std::string_view word : {std::string_view("true"), std::string_view("false")}) {
            if (lower.compare(i, word.size(), word) != 0) continue;
            const auto after = i + word.size();
            if (after < lower.size() && is_word_byte(static_cast<unsigned char>(lower[after]))) {
                continue;
            }
            return {word == "true", ParseStatus::Clean};
        }
    }
    return {false, ParseStatus::Fallback};
}

FactVerdict judge(const AtomicFact& fact, const PassageIndex& index, std::string_view language,
                  Gateway& lm, std::size_t k, const Bm25Params& bm25) {
    FactVerdict verdict;
    verdict.fact = fact;
    verdict.passages = retrieve(index, fact.text, language, k, bm25);
    if (verdict.passages.empty()) {
        verdict.supported = false;
        verdict.parse_status = ParseStatus::Fallback;
        return verdict;
    }
    const auto reply = lm.complete(lm.make_request(judge_prompt(verdict.passages, fact.text)));
    verdict.raw_reply = reply.text;
    const auto parsed = parse_verdict(reply.text);
    verdict.supported = parsed.supported;
    verdict.parse_status = parsed.status;
    return verdict;
}

double penalty(std::size_t num_facts, int gamma, GammaBoundary boundary) {
    if (num_facts == 0 || gamma < 1) {
        throw PreconditionError("penalty: num_facts and gamma must be at least 1");
    }
    const auto g = static_cast<std::size_t>(gamma);
    const bool applies = boundary == GammaBoundary::LessOrEqual ? num_facts <= g : num_facts < g;
    if (!applies) return 1.0;
    return std::exp((1.0 - static_cast<double>(gamma)) / static_cast<double>(num_facts));
}

ScoreResult score_counts(std::size_t num_facts, std::size_t num_supported, int gamma,
                         GammaBoundary boundary) {
    if (gamma < 1) {
        throw PreconditionError("score: gamma must be at least 1");
    }
    if (num_supported > num_facts) {
        throw PreconditionError("score: more supported facts than facts");
    }
    ScoreResult result;
    result.num_facts = num_facts;
    result.num_supported = num_supported;
    result.gamma = gamma;
    if (num_facts == 0) {
        result.penalty = std::exp(1.0 - static_cast<double>(gamma));
        result.score = 0.0;
        result.degenerate = true;
        return result;
    }
    result.penalty = penalty(num_facts, gamma, boundary);
    result.score = result.penalty * static_cast<double>(num_supported) /
                   static_cast<double>(num_facts);
    return result;
}

ScoreResult score(std::span<const FactVerdict> verdicts, int gamma, GammaBoundary boundary) {
    std::size_t supported = 0;
    for (const auto& v : verdicts) supported += v.supported ? 1 : 0;
    return score_counts(verdicts.size(), supported, gamma, boundary);
}

json to_json(const ScoredPassage& p) {
    return {{"entity_id", p.passage.doc_key.entity_id},
            {"language", p.passage.doc_key.language},
            {"variant", to_string(p.passage.doc_key.variant)},
            {"index", p.passage.index},
            {"score", p.score},
            {"text", p.passage.text}};
}

json to_json(const FactVerdict& v) {
    json passages = json::array();
    for (const auto& p : v.passages) passages.push_back(to_json(p));
    return {{"fact", v.fact.text},
            {"sentence_index", v.fact.sentence_index},
            {"supported", v.supported},
            {"parse_status", to_string(v.parse_status)},
            {"raw_reply", v.raw_reply},
            {"passages", std::move(passages)}};
}

json to_json(const ScoreResult& r) {
    return {{"num_facts", r.num_facts}, {"num_supported", r.num_supported},
            {"gamma", r.gamma},         {"penalty", r.penalty},
            {"score", r.score},         {"degenerate", r.degenerate}};
}

ScoreResult score_result_from_json(const json& j) {
    ScoreResult r;
    r.num_facts = j.at("num_facts").get<std::size_t>();
    r.num_supported = j.at("num_supported").get<std::size_t>();
    r.gamma = j.at("gamma").get<int>();
    r.penalty = j.at("penalty").get<double>();
    r.score = j.at("score").get<double>();
    r.degenerate = j.value("degenerate", false);
    return r;
}

}  // namespace factgap
