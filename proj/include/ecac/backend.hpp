#pragma once

#include <cstdio>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecac/errors.hpp"

namespace ecac {

struct CompletionRequest {
    std::string prompt;
    int max_new_tokens = 128;
    double temperature = 1.0;
    std::vector<std::string> stop;
};

/// Uniform text-completion interface. Implementations must tolerate
/// concurrent complete() calls.
class CompletionBackend {
public:
    virtual ~CompletionBackend() = default;

    virtual std::string complete(const CompletionRequest& request) = 0;

    /// Throws BackendError when the backend is not usable.
    virtual void health_check() {}

    virtual std::string name() const = 0;
};

/// Append-only request log with a single rotation: once the file passes
/// max_bytes it is renamed to "<path>.1" and restarted. Callers must never
/// pass secrets into line().
class TranscriptLog {
public:
    TranscriptLog() = default;
    TranscriptLog(std::string path, std::size_t max_bytes = 1 << 20)
        : path_(std::move(path)), max_bytes_(max_bytes) {}

    bool enabled() const { return !path_.empty(); }

    void line(const std::string& text) {
        if (!enabled()) return;
        std::lock_guard<std::mutex> lock(mutex_);
        std::ofstream out(path_, std::ios::binary | std::ios::app);
        if (!out) return; // logging never takes the pipeline down
        out << text << '\n';
        out.flush();
        if (static_cast<std::size_t>(out.tellp()) > max_bytes_) {
            out.close();
            std::remove((path_ + ".1").c_str());
            std::rename(path_.c_str(), (path_ + ".1").c_str());
        }
    }

private:
    std::string path_;
    std::size_t max_bytes_ = 1 << 20;
    std::mutex mutex_;
};

/// Deterministic scripted backend for tests and dry runs.
///
/// Ordered mode replays a fixed response sequence and fails loudly when the
/// script runs out. Pattern mode keys responses on a prompt substring (first
/// matching rule wins) so results do not depend on batch interleaving. A
/// response equal to "<error>" simulates a backend failure.
class MockBackend : public CompletionBackend {
public:
    struct PatternRule {
        std::string contains;
        std::string response;
    };

    static MockBackend ordered(std::vector<std::string> responses) {
        MockBackend mock;
        mock.ordered_ = true;
        mock.responses_ = std::move(responses);
        return mock;
    }

    static MockBackend pattern(std::vector<PatternRule> rules, std::optional<std::string> fallback = std::nullopt) {
        MockBackend mock;
        mock.ordered_ = false;
        mock.rules_ = std::move(rules);
        mock.fallback_ = std::move(fallback);
        return mock;
    }

    static MockBackend from_json(const nlohmann::json& script) {
        if (!script.contains("mode")) throw ValidationError("mock script: missing 'mode'");
        const std::string mode = script["mode"].get<std::string>();
        if (mode == "ordered") {
            return ordered(script.at("responses").get<std::vector<std::string>>());
        }
        if (mode == "pattern") {
            std::vector<PatternRule> rules;
            for (const auto& rule : script.at("rules")) {
                rules.push_back({rule.at("contains").get<std::string>(), rule.at("response").get<std::string>()});
            }
            std::optional<std::string> fallback;
            if (script.contains("default")) fallback = script["default"].get<std::string>();
            return pattern(std::move(rules), std::move(fallback));
        }
        throw ValidationError("mock script: unknown mode '" + mode + "'");
    }

    static MockBackend from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open mock script: " + path);
        try {
            return from_json(nlohmann::json::parse(in));
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError("mock script " + path + ": " + e.what(), e.byte);
        }
    }

    std::string complete(const CompletionRequest& request) override {
        std::lock_guard<std::mutex> lock(*mutex_);
        prompts_.push_back(request.prompt);
        std::string response;
        if (ordered_) {
            if (next_ >= responses_.size()) {
                throw BackendError("mock script exhausted after " + std::to_string(responses_.size()) + " responses");
            }
            response = responses_[next_++];
        } else {
            const PatternRule* match = nullptr;
            for (const auto& rule : rules_) {
                if (request.prompt.find(rule.contains) != std::string::npos) {
                    match = &rule;
                    break;
                }
            }
            if (match != nullptr) {
                response = match->response;
            } else if (fallback_) {
                response = *fallback_;
            } else {
                throw BackendError("mock script has no rule matching the prompt");
            }
        }
        if (response == "<error>") throw BackendError("mock scripted failure");
        return response;
    }

    std::string name() const override { return "mock"; }

    std::size_t call_count() const {
        std::lock_guard<std::mutex> lock(*mutex_);
        return prompts_.size();
    }

    std::vector<std::string> prompts() const {
        std::lock_guard<std::mutex> lock(*mutex_);
        return prompts_;
    }

private:
    MockBackend() : mutex_(std::make_unique<std::mutex>()) {}

    bool ordered_ = false;
    std::vector<std::string> responses_;
    std::size_t next_ = 0;
    std::vector<PatternRule> rules_;
    std::optional<std::string> fallback_;
    mutable std::unique_ptr<std::mutex> mutex_;
    std::vector<std::string> prompts_;
};

/// How request/response bodies map onto the remote endpoint.
enum class WireAdapter {
    native,             // {prompt, max_new_tokens, temperature, stop} -> {text}
    openai_completions, // {model, prompt, max_tokens, ...} -> {choices: [{text}]}
    openai_chat,        // {model, messages: [...]} -> {choices: [{message: {content}}]}
};

inline WireAdapter wire_adapter_from_string(const std::string& s) {
    if (s == "native") return WireAdapter::native;
    if (s == "openai_completions") return WireAdapter::openai_completions;
    if (s == "openai_chat") return WireAdapter::openai_chat;
    throw ValidationError("unknown wire adapter '" + s + "'");
}

/// Backend selection and connection settings. Remote descriptors name the
/// environment variable holding the secret; the secret itself never appears
/// in configuration or logs.
struct BackendConfig {
    std::string kind = "mock"; // "remote" or "mock"

    // remote
    std::string endpoint;
    std::string auth_env;
    WireAdapter adapter = WireAdapter::native;
    std::string model;
    int max_attempts = 3;
    int retry_base_ms = 250;
    int retry_max_ms = 4000;
    int timeout_s = 60;
    std::string log_path;
    std::size_t log_max_bytes = 1 << 20;

    // mock
    nlohmann::json script;
};

inline BackendConfig load_backend_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open backend config: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("backend config " + path + ": " + e.what(), e.byte);
    }
    BackendConfig config;
    config.kind = j.value("kind", "mock");
    if (config.kind == "remote") {
        if (!j.contains("endpoint")) throw ValidationError("backend config: remote backend needs 'endpoint'");
        config.endpoint = j["endpoint"].get<std::string>();
        config.auth_env = j.value("auth_env", "");
        config.adapter = wire_adapter_from_string(j.value("adapter", "native"));
        config.model = j.value("model", "");
        config.max_attempts = j.value("max_attempts", 3);
        config.retry_base_ms = j.value("retry_base_ms", 250);
        config.retry_max_ms = j.value("retry_max_ms", 4000);
        config.timeout_s = j.value("timeout_s", 60);
        config.log_path = j.value("log_file", "");
        config.log_max_bytes = j.value("log_max_bytes", static_cast<std::size_t>(1 << 20));
    } else if (config.kind == "mock") {
        if (j.contains("script_file")) {
            std::ifstream script(j["script_file"].get<std::string>());
            if (!script) throw IoError("cannot open mock script: " + j["script_file"].get<std::string>());
            config.script = nlohmann::json::parse(script);
        } else if (j.contains("script")) {
            config.script = j["script"];
        } else {
            throw ValidationError("backend config: mock backend needs 'script' or 'script_file'");
        }
    } else {
        throw ValidationError("backend config: unknown kind '" + config.kind + "'");
    }
    return config;
}

} // namespace ecac
