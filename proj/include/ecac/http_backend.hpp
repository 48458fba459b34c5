#pragma once

#include <chrono>
#include <cstdlib>
#include <memory>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "ecac/backend.hpp"
#include "ecac/errors.hpp"

namespace ecac {

struct EndpointParts {
    std::string host;
    int port = 80;
    std::string path = "/";
};

inline EndpointParts parse_endpoint(const std::string& url) {
    const std::string scheme = "http://";
    if (url.rfind(scheme, 0) != 0) {
        throw ValidationError("endpoint must use http:// (got '" + url + "')");
    }
    EndpointParts parts;
    std::string rest = url.substr(scheme.size());
    const std::size_t slash = rest.find('/');
    if (slash != std::string::npos) {
        parts.path = rest.substr(slash);
        rest = rest.substr(0, slash);
    }
    const std::size_t colon = rest.find(':');
    if (colon != std::string::npos) {
        parts.host = rest.substr(0, colon);
        try {
            parts.port = std::stoi(rest.substr(colon + 1));
        } catch (const std::exception&) {
            throw ValidationError("endpoint has a malformed port: '" + url + "'");
        }
    } else {
        parts.host = rest;
    }
    if (parts.host.empty()) throw ValidationError("endpoint has no host: '" + url + "'");
    return parts;
}

/// Remote completion client. Transient failures (transport errors, 429 and
/// 5xx statuses) are retried with capped exponential backoff; a request that
/// succeeded is never re-sent. Log lines carry endpoint, status and attempt
/// number — never header contents, so the auth secret cannot leak.
class HttpBackend : public CompletionBackend {
public:
    explicit HttpBackend(BackendConfig config)
        : config_(std::move(config)),
          endpoint_(parse_endpoint(config_.endpoint)),
          log_(config_.log_path.empty() ? TranscriptLog{} : TranscriptLog{config_.log_path, config_.log_max_bytes}) {
        if (config_.max_attempts < 1) throw ValidationError("backend config: max_attempts must be >= 1");
    }

    std::string complete(const CompletionRequest& request) override {
        if (request.prompt.empty()) throw ContractError("complete: prompt must be nonempty");
        const std::string body = build_body(request).dump();
        log_line(0, 0, "request " + body);
        std::string last_error;
        int last_status = 0;
        for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
            httplib::Client client(endpoint_.host, endpoint_.port);
            client.set_connection_timeout(config_.timeout_s, 0);
            client.set_read_timeout(config_.timeout_s, 0);
            httplib::Headers headers;
            attach_auth(headers);
            auto res = client.Post(endpoint_.path, headers, body, "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                last_status = 0;
                log_line(0, attempt, last_error);
            } else if (res->status == 200) {
                log_line(res->status, attempt, "response " + res->body);
                return extract_text(res->body);
            } else {
                last_error = "HTTP " + std::to_string(res->status);
                last_status = res->status;
                log_line(res->status, attempt, "error");
                if (!retriable(res->status)) {
                    throw BackendError(describe() + ": " + last_error, last_status, attempt);
                }
            }
            if (attempt < config_.max_attempts) backoff(attempt);
        }
        throw BackendError(describe() + ": giving up after " + std::to_string(config_.max_attempts) +
                               " attempts (" + last_error + ")",
                           last_status, config_.max_attempts);
    }

    /// Round-trips a one-token request.
    void health_check() override {
        CompletionRequest probe;
        probe.prompt = "ping";
        probe.max_new_tokens = 1;
        probe.temperature = 0.0;
        try {
            complete(probe);
        } catch (const BackendError& e) {
            throw BackendError(describe() + " unhealthy: " + e.what(), e.status, e.attempts);
        }
    }

    std::string name() const override { return "remote(" + config_.endpoint + ")"; }

private:
    static bool retriable(int status) { return status == 429 || status >= 500; }

    std::string describe() const {
        return "backend " + endpoint_.host + ":" + std::to_string(endpoint_.port) + endpoint_.path;
    }

    void attach_auth(httplib::Headers& headers) {
        if (config_.auth_env.empty()) return;
        const char* secret = std::getenv(config_.auth_env.c_str());
        if (secret == nullptr || *secret == '\0') {
            throw BackendError("auth environment variable " + config_.auth_env + " is not set");
        }
        headers.emplace("Authorization", std::string("Bearer ") + secret);
    }

    void backoff(int attempt) {
        long delay = config_.retry_base_ms;
        for (int i = 1; i < attempt; ++i) delay *= 2;
        delay = std::min<long>(delay, config_.retry_max_ms);
        if (delay > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    }

    void log_line(int status, int attempt, const std::string& note) {
        if (!log_.enabled()) return;
        log_.line(describe() + " status=" + std::to_string(status) + " attempt=" + std::to_string(attempt) + " " +
                  note);
    }

    nlohmann::json build_body(const CompletionRequest& request) const {
        nlohmann::json body;
        switch (config_.adapter) {
        case WireAdapter::native:
            body["prompt"] = request.prompt;
            body["max_new_tokens"] = request.max_new_tokens;
            body["temperature"] = request.temperature;
            if (!request.stop.empty()) body["stop"] = request.stop;
            break;
        case WireAdapter::openai_completions:
            if (!config_.model.empty()) body["model"] = config_.model;
            body["prompt"] = request.prompt;
            body["max_tokens"] = request.max_new_tokens;
            body["temperature"] = request.temperature;
            if (!request.stop.empty()) body["stop"] = request.stop;
            break;
        case WireAdapter::openai_chat:
            if (!config_.model.empty()) body["model"] = config_.model;
            body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}});
            body["max_tokens"] = request.max_new_tokens;
            body["temperature"] = request.temperature;
            if (!request.stop.empty()) body["stop"] = request.stop;
            break;
        }
        return body;
    }

    std::string extract_text(const std::string& body) const {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(body);
        } catch (const nlohmann::json::parse_error&) {
            throw BackendError(describe() + ": response body is not JSON");
        }
        try {
            switch (config_.adapter) {
            case WireAdapter::native:
                return j.at("text").get<std::string>();
            case WireAdapter::openai_completions:
                return j.at("choices").at(0).at("text").get<std::string>();
            case WireAdapter::openai_chat:
                return j.at("choices").at(0).at("message").at("content").get<std::string>();
            }
        } catch (const nlohmann::json::exception&) {
            throw BackendError(describe() + ": response body has an unexpected shape");
        }
        throw BackendError(describe() + ": response body has an unexpected shape");
    }

    BackendConfig config_;
    EndpointParts endpoint_;
    TranscriptLog log_;
};

inline std::unique_ptr<CompletionBackend> make_backend(const BackendConfig& config) {
    if (config.kind == "mock") {
        return std::make_unique<MockBackend>(MockBackend::from_json(config.script));
    }
    return std::make_unique<HttpBackend>(config);
}

} // namespace ecac
