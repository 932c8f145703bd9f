#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "factgap/errors.h"
#include "factgap/io.h"
#include "factgap/lm_gateway.h"

namespace factgap {

HttpBackend::HttpBackend(HttpBackendOptions options) : options_(std::move(options)) {
    const auto& url = options_.base_url;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ValidationError("base_url must start with http:// or https://: " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    origin_ = url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!path_.empty() && path_.back() == '/') path_.pop_back();
    path_ += "/v1/chat/completions";
}

ChatResponse HttpBackend::send(const ChatRequest& request) {
    httplib::Client client(origin_);
    const auto seconds = static_cast<time_t>(options_.timeout.count());
    client.set_connection_timeout(seconds, 0);
    client.set_read_timeout(seconds, 0);
    client.set_write_timeout(seconds, 0);
    if (!options_.api_key.empty()) {
        client.set_bearer_token_auth(options_.api_key);
    }

    auto result = client.Post(path_, to_json(request).dump(), "application/json");
    if (!result) {
        throw TransportError("POST " + origin_ + path_ + ": " + httplib::to_string(result.error()),
                             1);
    }
    if (result->status < 200 || result->status >= 300) {
        throw BackendStatusError(result->status, result->body);
    }

    json body;
    try {
        body = json::parse(result->body);
    } catch (const json::parse_error& e) {
        throw MalformedResponseError(std::string("response is not JSON: ") + e.what());
    }
    try {
        const auto& choice = body.at("choices").at(0);
        ChatResponse response;
        const auto& content = choice.at("message").at("content");
        response.text = content.is_null() ? "" : content.get<std::string>();
        const auto reason = choice.value("finish_reason", std::string("stop"));
        response.finish_reason = reason == "stop"     ? FinishReason::Stop
                                 : reason == "length" ? FinishReason::Length
                                                      : FinishReason::Error;
        if (auto usage = body.find("usage"); usage != body.end() && usage->is_object()) {
            response.usage.prompt_tokens = usage->value("prompt_tokens", 0);
            response.usage.completion_tokens = usage->value("completion_tokens", 0);
        }
        if (response.finish_reason == FinishReason::Stop && response.text.empty()) {
            throw MalformedResponseError("empty completion with finish_reason=stop");
        }
        return response;
    } catch (const json::exception& e) {
        throw MalformedResponseError(std::string("unexpected response shape: ") + e.what());
    }
}

}  // namespace factgap
