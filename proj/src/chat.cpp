#include <thread>

#include <spdlog/spdlog.h>

#include "factgap/errors.h"
#include "factgap/io.h"
#include "factgap/language.h"
#include "factgap/lm_gateway.h"
#include "factgap/strings.h"

namespace factgap {

namespace fs = std::filesystem;

std::string_view to_string(Role role) {
    switch (role) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

std::string_view to_string(FinishReason reason) {
    switch (reason) {
        case FinishReason::Stop: return "stop";
        case FinishReason::Length: return "length";
        case FinishReason::Error: return "error";
    }
    return "error";
}

namespace {

FinishReason parse_finish_reason(std::string_view s) {
    if (s == "stop") return FinishReason::Stop;
    if (s == "length") return FinishReason::Length;
    return FinishReason::Error;
}

}  // namespace

void ChatRequest::validate() const {
    bool has_user = false;
    for (const auto& m : messages) {
        if (m.content.empty()) {
            throw PreconditionError("chat request has an empty message");
        }
        has_user = has_user || m.role == Role::User;
    }
    if (!has_user) {
        throw PreconditionError("chat request needs at least one user message");
    }
    if (!(temperature >= 0.0)) {
        throw PreconditionError("chat request temperature must be >= 0");
    }
    if (max_tokens <= 0) {
        throw PreconditionError("chat request max_tokens must be > 0");
    }
}

const std::string& ChatRequest::last_user_content() const {
    for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
        if (it->role == Role::User) return it->content;
    }
    throw PreconditionError("chat request has no user message");
}

json to_json(const ChatResponse& response) {
    return {{"text", response.text},
            {"finish_reason", to_string(response.finish_reason)},
            {"usage",
             {{"prompt_tokens", response.usage.prompt_tokens},
              {"completion_tokens", response.usage.completion_tokens}}}};
}

ChatResponse response_from_json(const json& j) {
    try {
        ChatResponse r;
        r.text = j.at("text").get<std::string>();
        r.finish_reason = parse_finish_reason(j.at("finish_reason").get<std::string>());
        if (auto it = j.find("usage"); it != j.end()) {
            r.usage.prompt_tokens = it->value("prompt_tokens", 0);
            r.usage.completion_tokens = it->value("completion_tokens", 0);
        }
        if (r.finish_reason == FinishReason::Stop && r.text.empty()) {
            throw MalformedResponseError("finish_reason=stop with empty text");
        }
        return r;
    } catch (const json::exception& e) {
        throw MalformedResponseError(std::string("bad response record: ") + e.what());
    }
}

json to_json(const ChatRequest& request) {
    json body{{"model", request.model},
              {"messages", json::array()},
              {"temperature", request.temperature},
              {"max_tokens", request.max_tokens}};
    for (const auto& m : request.messages) {
        body["messages"].push_back({{"role", to_string(m.role)}, {"content", m.content}});
    }
    if (request.seed) {
        body["seed"] = *request.seed;
    }
    return body;
}

std::string canonical_serialization(std::string_view backend_id, const ChatRequest& request) {
    nlohmann::ordered_json doc;
    doc["backend"] = backend_id;
    doc["model"] = request.model;
    auto& messages = doc["messages"] = nlohmann::ordered_json::array();
    for (const auto& m : request.messages) {
        nlohmann::ordered_json msg;
        msg["role"] = to_string(m.role);
        msg["content"] = m.content;
        messages.push_back(std::move(msg));
    }
    doc["temperature"] = request.temperature;
    doc["max_tokens"] = request.max_tokens;
    doc["seed"] = request.seed ? nlohmann::ordered_json(*request.seed) : nlohmann::ordered_json(nullptr);
    return doc.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

std::string cache_key(std::string_view backend_id, const ChatRequest& request) {
    return sha256_hex(canonical_serialization(backend_id, request));
}

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
}

fs::path ResponseCache::path_for(const std::string& key) const {
    return dir_ / (key + ".json");
}

std::optional<ChatResponse> ResponseCache::get(const std::string& key) const {
    const auto path = path_for(key);
    std::error_code ec;
    if (!fs::exists(path, ec)) return std::nullopt;
    try {
        return response_from_json(json::parse(read_file(path)));
    } catch (const std::exception& e) {
        spdlog::warn("ignoring unreadable cache entry {}: {}", path.string(), e.what());
        return std::nullopt;
    }
}

void ResponseCache::put(const std::string& key, const ChatResponse& response) const {
    write_file_atomic(path_for(key),
                      to_json(response).dump(-1, ' ', false, json::error_handler_t::replace));
}

Gateway::Gateway(std::string backend_id, std::shared_ptr<ChatBackend> backend,
                 std::shared_ptr<const ResponseCache> cache, ModelSettings settings,
                 GatewayOptions options)
    : backend_id_(std::move(backend_id)),
      backend_(std::move(backend)),
      cache_(std::move(cache)),
      settings_(std::move(settings)),
      options_(options),
      in_flight_(std::make_unique<std::counting_semaphore<>>(std::max(1, options.max_in_flight))) {
    if (options_.max_attempts < 1) {
        throw PreconditionError("gateway needs at least one attempt");
    }
}

ChatRequest Gateway::make_request(std::string prompt) const {
    ChatRequest request;
    request.model = settings_.model;
    request.messages.push_back({Role::User, std::move(prompt)});
    request.temperature = settings_.temperature;
    request.max_tokens = settings_.max_tokens;
    request.seed = settings_.seed;
    return request;
}

ChatResponse Gateway::complete(const ChatRequest& request) {
    request.validate();
    const std::string key = cache_key(backend_id_, request);
    if (cache_) {
        if (auto hit = cache_->get(key)) {
            std::lock_guard lock(mutex_);
            ++cache_hits_;
            log_.push_back({key, request, true});
            return *hit;
        }
    }
    if (!backend_) {
        throw TransportError("backend '" + backend_id_ + "' unavailable and no cached response", 0);
    }
    ChatResponse response;
    {
        in_flight_->acquire();
        struct Release {
            std::counting_semaphore<>& sem;
            ~Release() { sem.release(); }
        } release{*in_flight_};
        response = call_with_retries(request);
    }
    if (cache_ && response.finish_reason != FinishReason::Error) {
        cache_->put(key, response);
    }
    std::lock_guard lock(mutex_);
    log_.push_back({key, request, false});
    return response;
}

ChatResponse Gateway::call_with_retries(const ChatRequest& request) {
    auto backoff = options_.initial_backoff;
    std::string last_error;
    for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
        {
            std::lock_guard lock(mutex_);
            ++backend_calls_;
        }
        try {
            return backend_->send(request);
        } catch (const TransportError& e) {
            last_error = e.what();
        } catch (const BackendStatusError& e) {
            if (e.status() < 500 && e.status() != 429) throw;
            last_error = e.what();
        }
        if (attempt < options_.max_attempts) {
            spdlog::warn("backend '{}' attempt {}/{} failed: {}", backend_id_, attempt,
                         options_.max_attempts, last_error);
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
    throw TransportError("backend '" + backend_id_ + "' failed after " +
                             std::to_string(options_.max_attempts) + " attempts: " + last_error,
                         options_.max_attempts);
}

std::size_t Gateway::backend_calls() const {
    std::lock_guard lock(mutex_);
    return backend_calls_;
}

std::size_t Gateway::cache_hits() const {
    std::lock_guard lock(mutex_);
    return cache_hits_;
}

std::vector<CallRecord> Gateway::call_log() const {
    std::lock_guard lock(mutex_);
    return log_;
}

std::string translation_prompt(std::string_view text, std::string_view source,
                               std::string_view target) {
    std::string prompt = "Translate the following text from ";
    prompt += lookup_language(source).name;
    prompt += " to ";
    prompt += lookup_language(target).name;
    prompt += ". Output only the translation.\n\n";
    prompt += text;
    return prompt;
}

std::string translate(std::string_view text, std::string_view source, std::string_view target,
                      Gateway& translator) {
    if (source == target) {
        throw PreconditionError("translate: source and target language are both '" +
                                std::string(source) + "'");
    }
    if (trim_view(text).empty()) {
        throw PreconditionError("translate: empty text");
    }
    auto response = translator.complete(translator.make_request(translation_prompt(text, source, target)));
    auto out = trim(response.text);
    if (out.empty()) {
        throw Error("translator returned an empty reply");
    }
    return out;
}

}  // namespace factgap
