#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace factgap {

enum class Role { System, User, Assistant };

std::string_view to_string(Role role);

struct ChatMessage {
    Role role = Role::User;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int max_tokens = 1024;
    std::optional<std::int64_t> seed;

    /// Throws PreconditionError unless there is at least one user message,
    /// every content is non-empty, temperature >= 0 and max_tokens > 0.
    void validate() const;

    /// Content of the last user message.
    const std::string& last_user_content() const;

    bool operator==(const ChatRequest&) const = default;
};

enum class FinishReason { Stop, Length, Error };

std::string_view to_string(FinishReason reason);

struct Usage {
    int prompt_tokens = 0;
    int completion_tokens = 0;

    bool operator==(const Usage&) const = default;
};

struct ChatResponse {
    std::string text;
    FinishReason finish_reason = FinishReason::Stop;
    Usage usage;

    bool operator==(const ChatResponse&) const = default;
};

nlohmann::json to_json(const ChatResponse& response);
/// Throws MalformedResponseError.
ChatResponse response_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ChatRequest& request);

/// Field-order-fixed, whitespace-free serialization of (backend id, request).
std::string canonical_serialization(std::string_view backend_id, const ChatRequest& request);

/// Hex SHA-256 of the canonical serialization.
std::string cache_key(std::string_view backend_id, const ChatRequest& request);

/// One transport to a chat-completion model. Implementations throw
/// TransportError for connection trouble, BackendStatusError for non-success
/// statuses and MalformedResponseError for unusable bodies; retrying is the
/// Gateway's job.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual ChatResponse send(const ChatRequest& request) = 0;
};

struct HttpBackendOptions {
    std::string base_url;  // e.g. http://localhost:8000
    std::string api_key;   // sent as a bearer token when non-empty
    std::chrono::seconds timeout{120};
};

/// POST {base_url}/v1/chat/completions, reply at choices[0].message.content.
class HttpBackend : public ChatBackend {
public:
    explicit HttpBackend(HttpBackendOptions options);
    ChatResponse send(const ChatRequest& request) override;

private:
    HttpBackendOptions options_;
    std::string origin_;
    std::string path_;
};

/// Offline backend for tests and reproducible runs.
///
/// Lookup order: a response file `<dir>/<cache-key>.json` (same format as the
/// response cache, so a cache directory doubles as a fixture directory), then
/// the rule file. Each rule line is one of
///
///     {"pattern": REGEX, "reply": TEMPLATE}       $1.. refer to capture groups
///     {"pattern": REGEX, "reply_file": PATH}      path relative to the rule file
///     {"judge": "substring"}
///
/// with an optional "model" field restricting the rule to one model. Patterns
/// use Perl syntax where `.` stops at newlines and `^`/`$` anchor the whole
/// message (override inline with (?s) / (?m)). They are searched in the last
/// user message and the first matching rule wins.
/// The substring judge answers "True" when the fact of a support-judgment
/// prompt occurs verbatim in the prompt's passages and "False" otherwise.
/// Unmatched requests fail with a 404 BackendStatusError.
class FixtureBackend : public ChatBackend {
public:
    FixtureBackend(std::string backend_id, std::optional<std::filesystem::path> response_dir,
                   std::optional<std::filesystem::path> rules_path);
    ~FixtureBackend() override;

    ChatResponse send(const ChatRequest& request) override;

private:
    struct Rule;
    std::string backend_id_;
    std::optional<std::filesystem::path> response_dir_;
    std::vector<std::unique_ptr<Rule>> rules_;
};

/// Content-addressed response store: one JSON file per key, published by
/// rename. Unreadable entries are treated as misses.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir);

    std::optional<ChatResponse> get(const std::string& key) const;
    void put(const std::string& key, const ChatResponse& response) const;
    std::filesystem::path path_for(const std::string& key) const;

private:
    std::filesystem::path dir_;
};

struct ModelSettings {
    std::string model;
    double temperature = 0.0;
    int max_tokens = 1024;
    std::optional<std::int64_t> seed;
};

struct GatewayOptions {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{250};
    int max_in_flight = 8;
};

struct CallRecord {
    std::string key;
    ChatRequest request;
    bool cache_hit = false;
};

/// Cached, retrying, concurrency-bounded access to one named backend.
class Gateway {
public:
    Gateway(std::string backend_id, std::shared_ptr<ChatBackend> backend,
            std::shared_ptr<const ResponseCache> cache, ModelSettings settings,
            GatewayOptions options = {});

    /// Serves from cache when possible; otherwise calls the backend with
    /// bounded exponential backoff on transport failures and 5xx/429
    /// statuses, caches a successful reply and returns it.
    ChatResponse complete(const ChatRequest& request);

    /// A single-user-message request using this gateway's model settings.
    ChatRequest make_request(std::string prompt) const;

    const std::string& id() const noexcept { return backend_id_; }
    const ModelSettings& settings() const noexcept { return settings_; }

    std::size_t backend_calls() const;
    std::size_t cache_hits() const;
    /// Every complete() call, in completion order.
    std::vector<CallRecord> call_log() const;

private:
    ChatResponse call_with_retries(const ChatRequest& request);

    std::string backend_id_;
    std::shared_ptr<ChatBackend> backend_;
    std::shared_ptr<const ResponseCache> cache_;
    ModelSettings settings_;
    GatewayOptions options_;
    std::unique_ptr<std::counting_semaphore<>> in_flight_;
    mutable std::mutex mutex_;
    std::size_t backend_calls_ = 0;
    std::size_t cache_hits_ = 0;
    std::vector<CallRecord> log_;
};

/// Prompt sent to the translator.
std::string translation_prompt(std::string_view text, std::string_view source,
                               std::string_view target);

/// Translates `text` between two supported languages and returns the reply
/// with surrounding whitespace stripped. Throws PreconditionError when
/// source == target or text is empty, and Error on an empty reply.
std::string translate(std::string_view text, std::string_view source, std::string_view target,
                      Gateway& translator);

}  // namespace factgap
