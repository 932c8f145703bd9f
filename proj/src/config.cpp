#include "factgap/config.h"

#include <cstdlib>

#include "factgap/errors.h"
#include "factgap/io.h"
#include "factgap/language.h"

namespace factgap {

namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    auto it = j.find(key);
    return it == j.end() || it->is_null() ? fallback : it->get<T>();
}

BackendConfig parse_backend(const std::string& name, const json& j, const fs::path& base) {
    BackendConfig b;
    b.name = name;
    const auto kind = get_or<std::string>(j, "kind", "http");
    if (kind == "http") {
        b.kind = BackendKind::Http;
    } else if (kind == "fixture") {
        b.kind = BackendKind::Fixture;
    } else {
        throw ValidationError("backend '" + name + "': unknown kind '" + kind + "'");
    }
    b.base_url = get_or<std::string>(j, "base_url", "");
    b.model = get_or<std::string>(j, "model", name);
    if (j.contains("temperature") && !j.at("temperature").is_null()) {
        b.temperature = j.at("temperature").get<double>();
    }
    b.max_tokens = get_or(j, "max_tokens", b.max_tokens);
    if (j.contains("seed") && !j.at("seed").is_null()) b.seed = j.at("seed").get<std::int64_t>();
    b.max_in_flight = get_or(j, "max_in_flight", b.max_in_flight);
    b.max_attempts = get_or(j, "max_attempts", b.max_attempts);
    b.initial_backoff_ms = get_or(j, "initial_backoff_ms", b.initial_backoff_ms);
    b.timeout_seconds = get_or(j, "timeout_seconds", b.timeout_seconds);
    b.api_key_env = get_or<std::string>(j, "api_key_env", b.api_key_env);
    if (auto p = get_or<std::string>(j, "fixture_dir", ""); !p.empty()) b.fixture_dir = resolve(base, p);
    if (auto p = get_or<std::string>(j, "fixture_rules", ""); !p.empty()) {
        b.fixture_rules = resolve(base, p);
    }
    if (b.kind == BackendKind::Http && b.base_url.empty()) {
        throw ValidationError("backend '" + name + "': http backends need base_url");
    }
    if (b.kind == BackendKind::Fixture && !b.fixture_dir && !b.fixture_rules) {
        throw ValidationError("backend '" + name + "': fixture backends need fixture_dir or fixture_rules");
    }
    if (b.max_in_flight < 1 || b.max_attempts < 1 || b.max_tokens < 1) {
        throw ValidationError("backend '" + name + "': limits must be positive");
    }
    if (b.temperature && *b.temperature < 0.0) {
        throw ValidationError("backend '" + name + "': temperature must be >= 0");
    }
    return b;
}

}  // namespace

RunConfig RunConfig::load(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    } catch (const IoError& e) {
        throw ValidationError(e.what());
    }
    return from_json(j, fs::absolute(path).parent_path());
}

RunConfig RunConfig::from_json(const json& j, const fs::path& base) {
    RunConfig c;
    c.raw = j;
    try {
        c.cache_dir = resolve(base, get_or<std::string>(j, "cache_dir", "cache"));
        if (auto it = j.find("backends"); it != j.end()) {
            for (const auto& [name, b] : it->items()) {
                c.backends.emplace(name, parse_backend(name, b, base));
            }
        }
        c.lm_eval = get_or<std::string>(j, "lm_eval", "");
        c.translator = get_or<std::string>(j, "translator", "");
        c.gamma = get_or(j, "gamma", c.gamma);
        const auto boundary = get_or<std::string>(j, "gamma_boundary", "le");
        if (boundary == "le") {
            c.gamma_boundary = GammaBoundary::LessOrEqual;
        } else if (boundary == "lt") {
            c.gamma_boundary = GammaBoundary::LessThan;
        } else {
            throw ValidationError("gamma_boundary must be 'le' or 'lt'");
        }
        if (auto it = j.find("bm25"); it != j.end()) {
            c.bm25.k1 = get_or(*it, "k1", c.bm25.k1);
            c.bm25.b = get_or(*it, "b", c.bm25.b);
            c.k = get_or(*it, "k", c.k);
            c.max_tokens = get_or(*it, "max_tokens", c.max_tokens);
        }
        if (auto it = j.find("sanity"); it != j.end()) {
            c.distinct_word_min = get_or(*it, "distinct_word_min", c.distinct_word_min);
            c.confidence_margin = get_or(*it, "confidence_margin", c.confidence_margin);
        }
        if (auto it = j.find("paths"); it != j.end()) {
            c.corpus = resolve(base, get_or<std::string>(*it, "corpus", "corpus"));
            c.demos = resolve(base, get_or<std::string>(*it, "demos", "demos.jsonl"));
            c.template_table = resolve(base, get_or<std::string>(*it, "template_table", "templates.jsonl"));
            c.out_dir = resolve(base, get_or<std::string>(*it, "out_dir", "out"));
        } else {
            throw ValidationError("config needs a 'paths' section");
        }
        c.languages = get_or<std::vector<std::string>>(j, "languages", {});
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    if (c.gamma < 1) throw ValidationError("gamma must be at least 1");
    if (c.k < 1) throw ValidationError("bm25.k must be at least 1");
    if (c.max_tokens < kMinChunkTokens) {
        throw ValidationError("bm25.max_tokens must be at least " + std::to_string(kMinChunkTokens));
    }
    for (const auto& l : c.languages) lookup_language(l);
    return c;
}

const BackendConfig& RunConfig::backend(const std::string& name) const {
    auto it = backends.find(name);
    if (it == backends.end()) {
        throw ValidationError("unknown backend '" + name + "'");
    }
    return it->second;
}

std::string RunConfig::run_id() const {
    json identity = raw;
    identity.erase("cache_dir");
    identity.erase("paths");
    json inputs = json::object();
    auto digest_of = [&](const char* name, const fs::path& p) {
        std::error_code ec;
        if (fs::is_regular_file(p, ec)) inputs[name] = sha256_hex(read_file(p));
    };
    digest_of("corpus_entities", corpus / "entities.jsonl");
    digest_of("corpus_docs", corpus / "docs.jsonl");
    digest_of("demos", demos);
    digest_of("template_table", template_table);
    identity["inputs"] = inputs;
    return sha256_hex(identity.dump()).substr(0, 16);
}

std::unique_ptr<Gateway> make_gateway(const RunConfig& config, const std::string& name,
                                      double default_temperature,
                                      std::shared_ptr<const ResponseCache> cache) {
    const auto& b = config.backend(name);
    std::shared_ptr<ChatBackend> backend;
    if (b.kind == BackendKind::Http) {
        HttpBackendOptions options;
        options.base_url = b.base_url;
        if (const char* key = std::getenv(b.api_key_env.c_str())) options.api_key = key;
        options.timeout = std::chrono::seconds(b.timeout_seconds);
        backend = std::make_shared<HttpBackend>(std::move(options));
    } else {
        backend = std::make_shared<FixtureBackend>(name, b.fixture_dir, b.fixture_rules);
    }
    ModelSettings settings{b.model, b.temperature.value_or(default_temperature), b.max_tokens, b.seed};
    GatewayOptions options;
    options.max_attempts = b.max_attempts;
    options.initial_backoff = std::chrono::milliseconds(b.initial_backoff_ms);
    options.max_in_flight = b.max_in_flight;
    return std::make_unique<Gateway>(name, std::move(backend), std::move(cache), std::move(settings),
                                     options);
}

}  // namespace factgap
