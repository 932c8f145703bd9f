#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "factgap/factscore.h"
#include "factgap/lm_gateway.h"
#include "factgap/retrieval.h"

namespace factgap {

enum class BackendKind { Http, Fixture };

struct BackendConfig {
    std::string name;
    BackendKind kind = BackendKind::Http;
    std::string base_url;
    std::string model;
    std::optional<double> temperature;  // role default when unset
    int max_tokens = 1024;
    std::optional<std::int64_t> seed;
    int max_in_flight = 8;
    int max_attempts = 3;
    int initial_backoff_ms = 250;
    int timeout_seconds = 120;
    std::string api_key_env = "FACTGAP_API_KEY";
    std::optional<std::filesystem::path> fixture_dir;
    std::optional<std::filesystem::path> fixture_rules;
};

/// Decoding temperature per role when a backend does not set one.
inline constexpr double kEvaluatorTemperature = 0.0;
inline constexpr double kSubjectTemperature = 0.7;

/// Parsed run configuration. Relative paths resolve against the config
/// file's directory.
struct RunConfig {
    std::filesystem::path cache_dir;
    std::map<std::string, BackendConfig> backends;
    std::string lm_eval;     // backend name used for decomposition and judging
    std::string translator;  // backend name used for translation
    int gamma = 10;
    GammaBoundary gamma_boundary = GammaBoundary::LessOrEqual;
    Bm25Params bm25;
    std::size_t k = 5;
    std::size_t max_tokens = 128;
    std::size_t distinct_word_min = 20;
    double confidence_margin = 0.05;
    std::filesystem::path corpus;  // directory with entities.jsonl and docs.jsonl
    std::filesystem::path demos;
    std::filesystem::path template_table;
    std::filesystem::path out_dir;
    std::vector<std::string> languages;
    nlohmann::json raw;

    /// Throws ValidationError on bad shape or values.
    static RunConfig load(const std::filesystem::path& path);
    static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

    /// Throws ValidationError for an unknown name.
    const BackendConfig& backend(const std::string& name) const;

    /// Content address of this run: a digest of the configuration (without
    /// output and cache locations) and of the corpus, demonstration and
    /// template inputs that exist.
    std::string run_id() const;
    std::filesystem::path run_dir() const { return out_dir / run_id(); }
};

/// Gateway for backend `name`, sharing `cache`.
std::unique_ptr<Gateway> make_gateway(const RunConfig& config, const std::string& name,
                                      double default_temperature,
                                      std::shared_ptr<const ResponseCache> cache);

}  // namespace factgap
