#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "factgap/lm_gateway.h"
#include "factgap/retrieval.h"

namespace factgap {

/// One independent claim extracted from a response.
struct AtomicFact {
    std::string text;
    std::size_t sentence_index = 0;  // sentence of the response it came from

    bool operator==(const AtomicFact&) const = default;
};

enum class ParseStatus { Clean, Fallback };

std::string_view to_string(ParseStatus status);

struct FactVerdict {
    AtomicFact fact;
    bool supported = false;
    std::vector<ScoredPassage> passages;  // what the judge was shown
    std::string raw_reply;
    ParseStatus parse_status = ParseStatus::Fallback;

    bool operator==(const FactVerdict&) const = default;
};

/// A few-shot decomposition exemplar.
struct Demonstration {
    std::string sentence;
    std::vector<std::string> facts;
};

/// Reads line-delimited {sentence, facts} records.
std::vector<Demonstration> load_demonstrations(const std::filesystem::path& path);

inline constexpr std::string_view kDecomposeInstruction =
    "Please breakdown the following sentence into independent facts: ";

/// The demonstrations, each followed by its fact list, then the instruction
/// for `sentence`.
std::string decomposition_prompt(std::span<const Demonstration> demos, std::string_view sentence);

/// Trimmed text of every line starting with "- ".
std::vector<std::string> parse_fact_lines(std::string_view reply);

/// Splits `response` into sentences and asks `lm` to break each one into
/// atomic facts. Facts come back in response order.
/// Throws PreconditionError for a blank response.
std::vector<AtomicFact> decompose(std::string_view response, std::string_view language,
                                  Gateway& lm, std::span<const Demonstration> demos);

/// "{passages separated by blank lines}\n\nInput: {fact} True or False?\nOutput:"
std::string judge_prompt(std::span<const ScoredPassage> passages, std::string_view fact);

struct ParsedVerdict {
    bool supported = false;
    ParseStatus status = ParseStatus::Fallback;

    bool operator==(const ParsedVerdict&) const = default;
};

/// The first standalone "true" or "false" (any case) decides; neither means
/// not supported, with a fallback status.
ParsedVerdict parse_verdict(std::string_view raw);

/// Retrieves the top-`k` passages for the fact and asks `lm` whether they
/// support it. No passages means not supported without an LM call.
FactVerdict judge(const AtomicFact& fact, const PassageIndex& index, std::string_view language,
                  Gateway& lm, std::size_t k, const Bm25Params& bm25 = {});

/// Where the length penalty stops applying.
enum class GammaBoundary {
    LessOrEqual,  // penalize when num_facts <= gamma
    LessThan,     // penalize when num_facts < gamma
};

/// exp((1 - gamma) / num_facts) for short responses, 1 otherwise.
/// Throws PreconditionError when num_facts or gamma is zero.
double penalty(std::size_t num_facts, int gamma,
               GammaBoundary boundary = GammaBoundary::LessOrEqual);

struct ScoreResult {
    std::size_t num_facts = 0;
    std::size_t num_supported = 0;
    int gamma = 10;
    double penalty = 1.0;
    double score = 0.0;
    bool degenerate = false;  // no facts at all

    bool operator==(const ScoreResult&) const = default;
};

/// Penalized supported fraction. Zero facts score 0 with penalty
/// exp(1 - gamma) and the degenerate flag set.
ScoreResult score_counts(std::size_t num_facts, std::size_t num_supported, int gamma,
                         GammaBoundary boundary = GammaBoundary::LessOrEqual);

ScoreResult score(std::span<const FactVerdict> verdicts, int gamma,
                  GammaBoundary boundary = GammaBoundary::LessOrEqual);

nlohmann::json to_json(const ScoredPassage& passage);
nlohmann::json to_json(const FactVerdict& verdict);
nlohmann::json to_json(const ScoreResult& result);
ScoreResult score_result_from_json(const nlohmann::json& j);

}  // namespace factgap
