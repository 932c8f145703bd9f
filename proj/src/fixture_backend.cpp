#include <boost/regex.hpp>

#include "factgap/errors.h"
#include "factgap/io.h"
#include "factgap/lm_gateway.h"
#include "factgap/strings.h"

namespace factgap {

namespace fs = std::filesystem;

struct FixtureBackend::Rule {
    std::optional<std::string> model;
    std::optional<boost::regex> pattern;
    std::string reply;
    bool reply_is_template = false;
    bool substring_judge = false;
};

namespace {

constexpr std::string_view kJudgeInput = "Input: ";
constexpr std::string_view kJudgeQuestion = " True or False?";

/// Splits a support-judgment prompt into (context, fact).
std::optional<std::pair<std::string_view, std::string_view>> split_judge_prompt(
    std::string_view prompt) {
    const auto input = prompt.rfind(kJudgeInput);
    if (input == std::string_view::npos) return std::nullopt;
    const auto question = prompt.find(kJudgeQuestion, input);
    if (question == std::string_view::npos) return std::nullopt;
    const auto fact_begin = input + kJudgeInput.size();
    return std::pair{prompt.substr(0, input), prompt.substr(fact_begin, question - fact_begin)};
}

}  // namespace

FixtureBackend::FixtureBackend(std::string backend_id,
                               std::optional<fs::path> response_dir,
                               std::optional<fs::path> rules_path)
    : backend_id_(std::move(backend_id)), response_dir_(std::move(response_dir)) {
    if (!rules_path) return;
    const auto base = rules_path->parent_path();
    for_each_jsonl(*rules_path, [&](const json& r, std::size_t line) {
        auto where = rules_path->filename().string() + ":" + std::to_string(line) + ": ";
        auto rule = std::make_unique<Rule>();
        if (auto m = r.find("model"); m != r.end()) {
            rule->model = m->get<std::string>();
        }
        if (r.value("judge", std::string()) == "substring") {
            rule->substring_judge = true;
        } else {
            if (!r.contains("pattern")) {
                throw ValidationError(where + "rule needs 'pattern' or 'judge'");
            }
            try {
                rule->pattern = boost::regex(r.at("pattern").get<std::string>(),
                                             boost::regex::perl | boost::regex::no_mod_s |
                                                 boost::regex::no_mod_m);
            } catch (const boost::regex_error& e) {
                throw ValidationError(where + "bad pattern: " + e.what());
            }
            if (r.contains("reply")) {
                rule->reply = r.at("reply").get<std::string>();
                rule->reply_is_template = true;
            } else if (r.contains("reply_file")) {
                rule->reply = read_file(base / r.at("reply_file").get<std::string>());
            } else {
                throw ValidationError(where + "rule needs 'reply' or 'reply_file'");
            }
        }
        rules_.push_back(std::move(rule));
    });
}

FixtureBackend::~FixtureBackend() = default;

ChatResponse FixtureBackend::send(const ChatRequest& request) {
    if (response_dir_) {
        const auto path = *response_dir_ / (cache_key(backend_id_, request) + ".json");
        std::error_code ec;
        if (fs::exists(path, ec)) {
            return response_from_json(json::parse(read_file(path)));
        }
    }
    const auto& prompt = request.last_user_content();
    for (const auto& rule : rules_) {
        if (rule->model && *rule->model != request.model) continue;
        if (rule->substring_judge) {
            if (auto parts = split_judge_prompt(prompt)) {
                const bool found =
                    !parts->second.empty() && parts->first.find(parts->second) != std::string_view::npos;
                return {found ? "True" : "False", FinishReason::Stop, {}};
            }
            continue;
        }
        boost::smatch match;
        if (!boost::regex_search(prompt, match, *rule->pattern)) continue;
        std::string text = rule->reply_is_template
                               ? match.format(rule->reply, boost::format_perl)
                               : rule->reply;
        if (trim_view(text).empty()) {
            return {text, FinishReason::Error, {}};
        }
        return {text, FinishReason::Stop, {}};
    }
    throw BackendStatusError(404, "no fixture matches request for model '" + request.model + "'");
}

}  // namespace factgap
