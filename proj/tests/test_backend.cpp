#include <catch2/catch.hpp>

#include <atomic>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "ecac/backend.hpp"
#include "ecac/http_backend.hpp"

#include "helpers.hpp"

using namespace ecac;

namespace {

/// Stub HTTP server on an ephemeral localhost port.
struct StubServer {
    httplib::Server server;
    int port = 0;
    std::thread thread;

    explicit StubServer(httplib::Server::Handler handler) {
        server.Post("/complete", std::move(handler));
        port = server.bind_to_any_port("127.0.0.1");
        REQUIRE(port > 0);
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }

    ~StubServer() {
        server.stop();
        thread.join();
    }

    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port) + "/complete"; }
};

BackendConfig remote_config(const std::string& endpoint) {
    BackendConfig config;
    config.kind = "remote";
    config.endpoint = endpoint;
    config.max_attempts = 3;
    config.retry_base_ms = 1;
    config.retry_max_ms = 4;
    config.timeout_s = 5;
    return config;
}

} // namespace

TEST_CASE("ordered mock replays its script and fails on exhaustion") {
    auto mock = MockBackend::ordered({"first", "second"});
    REQUIRE(mock.complete({"p1"}) == "first");
    REQUIRE(mock.complete({"p2"}) == "second");
    REQUIRE(mock.call_count() == 2);
    REQUIRE(mock.prompts() == std::vector<std::string>{"p1", "p2"});
    REQUIRE_THROWS_AS(mock.complete({"p3"}), BackendError);
}

TEST_CASE("pattern mock keys on prompt substrings, first rule wins") {
    auto mock = MockBackend::pattern({{"step one", "span text"}, {"step", "generic"}}, std::string("fallback"));
    REQUIRE(mock.complete({"this is step one"}) == "span text");
    REQUIRE(mock.complete({"another step here"}) == "generic");
    REQUIRE(mock.complete({"nothing matches"}) == "fallback");

    auto strict = MockBackend::pattern({{"never", "x"}});
    REQUIRE_THROWS_AS(strict.complete({"no rule for this"}), BackendError);
}

TEST_CASE("the mock is referentially transparent") {
    const std::vector<std::string> prompts = {"alpha question", "beta question", "gamma question"};
    auto run = [&](MockBackend mock) {
        std::vector<std::string> outputs;
        for (const auto& p : prompts) outputs.push_back(mock.complete({p}));
        return outputs;
    };
    const auto a = run(MockBackend::ordered({"1", "2", "3"}));
    const auto b = run(MockBackend::ordered({"1", "2", "3"}));
    REQUIRE(a == b);

    auto pattern = [] { return MockBackend::pattern({{"alpha", "A"}, {"beta", "B"}}, std::string("C")); };
    REQUIRE(run(pattern()) == run(pattern()));
}

TEST_CASE("mock scripts load from JSON") {
    const auto ordered = nlohmann::json::parse(R"({"mode": "ordered", "responses": ["a", "b"]})");
    auto mock = MockBackend::from_json(ordered);
    REQUIRE(mock.complete({"x"}) == "a");

    const auto pattern = nlohmann::json::parse(
        R"({"mode": "pattern", "rules": [{"contains": "k", "response": "v"}], "default": "d"})");
    auto pmock = MockBackend::from_json(pattern);
    REQUIRE(pmock.complete({"has k inside"}) == "v");
    REQUIRE(pmock.complete({"nothing"}) == "d");

    REQUIRE_THROWS_AS(MockBackend::from_json(nlohmann::json::parse(R"({"mode": "bogus"})")), ValidationError);
    REQUIRE_THROWS_AS(MockBackend::from_json(nlohmann::json::parse(R"({})")), ValidationError);
}

TEST_CASE("scripted <error> responses simulate failures") {
    auto mock = MockBackend::pattern({{"boom", "<error>"}}, std::string("ok"));
    REQUIRE(mock.complete({"fine"}) == "ok");
    REQUIRE_THROWS_AS(mock.complete({"boom now"}), BackendError);
}

TEST_CASE("endpoint parsing") {
    const auto parts = parse_endpoint("http://localhost:8080/v1/complete");
    REQUIRE(parts.host == "localhost");
    REQUIRE(parts.port == 8080);
    REQUIRE(parts.path == "/v1/complete");

    const auto bare = parse_endpoint("http://example.org");
    REQUIRE(bare.host == "example.org");
    REQUIRE(bare.port == 80);
    REQUIRE(bare.path == "/");

    REQUIRE_THROWS_AS(parse_endpoint("https://secure.example"), ValidationError);
    REQUIRE_THROWS_AS(parse_endpoint("http://:80/x"), ValidationError);
    REQUIRE_THROWS_AS(parse_endpoint("http://host:notaport/x"), ValidationError);
}

TEST_CASE("remote backend returns the stub's completion") {
    StubServer stub([](const httplib::Request& req, httplib::Response& res) {
        const auto body = nlohmann::json::parse(req.body);
        REQUIRE(body.at("prompt") == "hello");
        REQUIRE(body.at("max_new_tokens") == 16);
        res.set_content(R"({"text": "canned body"})", "application/json");
    });
    HttpBackend backend(remote_config(stub.endpoint()));
    CompletionRequest request;
    request.prompt = "hello";
    request.max_new_tokens = 16;
    REQUIRE(backend.complete(request) == "canned body");
}

TEST_CASE("transient 503s are retried until success") {
    std::atomic<int> attempts{0};
    StubServer stub([&](const httplib::Request&, httplib::Response& res) {
        const int n = ++attempts;
        if (n <= 2) {
            res.status = 503;
            res.set_content("overloaded", "text/plain");
        } else {
            res.set_content(R"({"text": "recovered"})", "application/json");
        }
    });
    HttpBackend backend(remote_config(stub.endpoint()));
    REQUIRE(backend.complete({"retry me"}) == "recovered");
    REQUIRE(attempts.load() == 3);
}

TEST_CASE("successful requests are never re-sent") {
    std::atomic<int> attempts{0};
    StubServer stub([&](const httplib::Request&, httplib::Response& res) {
        ++attempts;
        res.set_content(R"({"text": "ok"})", "application/json");
    });
    HttpBackend backend(remote_config(stub.endpoint()));
    REQUIRE(backend.complete({"once"}) == "ok");
    REQUIRE(attempts.load() == 1);
}

TEST_CASE("non-retriable statuses surface immediately") {
    std::atomic<int> attempts{0};
    StubServer stub([&](const httplib::Request&, httplib::Response& res) {
        ++attempts;
        res.status = 404;
    });
    HttpBackend backend(remote_config(stub.endpoint()));
    try {
        backend.complete({"missing"});
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        REQUIRE(e.status == 404);
        REQUIRE(e.attempts == 1);
    }
    REQUIRE(attempts.load() == 1);
}

TEST_CASE("retries give up at the attempt cap") {
    std::atomic<int> attempts{0};
    StubServer stub([&](const httplib::Request&, httplib::Response& res) {
        ++attempts;
        res.status = 503;
    });
    auto config = remote_config(stub.endpoint());
    config.max_attempts = 2;
    HttpBackend backend(config);
    try {
        backend.complete({"always failing"});
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        REQUIRE(e.attempts == 2);
        REQUIRE(e.status == 503);
    }
    REQUIRE(attempts.load() == 2);
}

TEST_CASE("health check round-trips one token and reports failures") {
    StubServer stub([](const httplib::Request& req, httplib::Response& res) {
        const auto body = nlohmann::json::parse(req.body);
        REQUIRE(body.at("max_new_tokens") == 1);
        res.set_content(R"({"text": "pong"})", "application/json");
    });
    HttpBackend healthy(remote_config(stub.endpoint()));
    REQUIRE_NOTHROW(healthy.health_check());

    // A closed port: connection refused, diagnostic names the port.
    auto down_config = remote_config("http://127.0.0.1:1/complete");
    down_config.max_attempts = 1;
    HttpBackend down(down_config);
    try {
        down.health_check();
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        REQUIRE(std::string(e.what()).find(":1") != std::string::npos);
    }
}

TEST_CASE("malformed response bodies are protocol errors") {
    StubServer stub([](const httplib::Request&, httplib::Response& res) {
        res.set_content("this is not json", "text/plain");
    });
    auto config = remote_config(stub.endpoint());
    config.max_attempts = 1;
    HttpBackend backend(config);
    try {
        backend.complete({"x"});
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        REQUIRE(std::string(e.what()).find("not JSON") != std::string::npos);
    }

    StubServer wrong_shape([](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"unexpected": true})", "application/json");
    });
    HttpBackend backend2(remote_config(wrong_shape.endpoint()));
    REQUIRE_THROWS_AS(backend2.complete({"x"}), BackendError);
}

TEST_CASE("wire adapters map to the public API shapes") {
    StubServer completions([](const httplib::Request& req, httplib::Response& res) {
        const auto body = nlohmann::json::parse(req.body);
        REQUIRE(body.at("model") == "test-model");
        REQUIRE(body.at("prompt") == "q");
        REQUIRE(body.at("max_tokens") == 8);
        res.set_content(R"({"choices": [{"text": "from completions"}]})", "application/json");
    });
    auto config = remote_config(completions.endpoint());
    config.adapter = WireAdapter::openai_completions;
    config.model = "test-model";
    CompletionRequest request;
    request.prompt = "q";
    request.max_new_tokens = 8;
    REQUIRE(HttpBackend(config).complete(request) == "from completions");

    StubServer chat([](const httplib::Request& req, httplib::Response& res) {
        const auto body = nlohmann::json::parse(req.body);
        REQUIRE(body.at("messages").at(0).at("role") == "user");
        REQUIRE(body.at("messages").at(0).at("content") == "q");
        res.set_content(R"({"choices": [{"message": {"content": "from chat"}}]})", "application/json");
    });
    auto chat_config = remote_config(chat.endpoint());
    chat_config.adapter = WireAdapter::openai_chat;
    REQUIRE(HttpBackend(chat_config).complete(request) == "from chat");
}

TEST_CASE("the auth secret reaches the server but never the log") {
    constexpr const char* kSecret = "sk-super-secret-value-1234";
    setenv("ECAC_TEST_AUTH", kSecret, 1);

    std::string seen_auth;
    StubServer stub([&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        res.set_content(R"({"text": "ok"})", "application/json");
    });

    testutil::TempDir dir("authlog");
    auto config = remote_config(stub.endpoint());
    config.auth_env = "ECAC_TEST_AUTH";
    config.log_path = dir.file("backend.log");
    HttpBackend backend(config);
    REQUIRE(backend.complete({"secret test"}) == "ok");
    REQUIRE(seen_auth == std::string("Bearer ") + kSecret);

    const auto log = testutil::read_file(dir.file("backend.log"));
    REQUIRE_FALSE(log.empty());
    REQUIRE(log.find(kSecret) == std::string::npos);
    // The log is a request/response transcript; bodies never hold the secret.
    REQUIRE(log.find("request") != std::string::npos);
    REQUIRE(log.find("secret test") != std::string::npos);
    REQUIRE(log.find("response") != std::string::npos);

    // Unset variable: error names the variable, not a value.
    auto missing = remote_config(stub.endpoint());
    missing.auth_env = "ECAC_TEST_AUTH_UNSET";
    unsetenv("ECAC_TEST_AUTH_UNSET");
    HttpBackend broken(missing);
    try {
        broken.complete({"x"});
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        REQUIRE(std::string(e.what()).find("ECAC_TEST_AUTH_UNSET") != std::string::npos);
    }
}

TEST_CASE("the request log rotates past its size cap") {
    StubServer stub([](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"text": "ok"})", "application/json");
    });
    testutil::TempDir dir("rotate");
    auto config = remote_config(stub.endpoint());
    config.log_path = dir.file("rotating.log");
    config.log_max_bytes = 64;
    HttpBackend backend(config);
    for (int i = 0; i < 6; ++i) backend.complete({"fill the log"});
    REQUIRE(std::filesystem::exists(dir.file("rotating.log.1")));
}

TEST_CASE("backend config files select and configure the backend") {
    testutil::TempDir dir("config");
    {
        std::ofstream out(dir.file("mock.json"));
        out << R"({"kind": "mock", "script": {"mode": "ordered", "responses": ["hi"]}})";
    }
    const auto mock_config = load_backend_config(dir.file("mock.json"));
    auto backend = make_backend(mock_config);
    REQUIRE(backend->complete({"x"}) == "hi");
    REQUIRE_NOTHROW(backend->health_check());

    {
        std::ofstream out(dir.file("remote.json"));
        out << R"({"kind": "remote", "endpoint": "http://127.0.0.1:9/x", "auth_env": "NOPE",
                   "adapter": "openai_chat", "max_attempts": 5})";
    }
    const auto remote = load_backend_config(dir.file("remote.json"));
    REQUIRE(remote.kind == "remote");
    REQUIRE(remote.adapter == WireAdapter::openai_chat);
    REQUIRE(remote.max_attempts == 5);
    REQUIRE(remote.endpoint == "http://127.0.0.1:9/x");

    {
        std::ofstream out(dir.file("bad.json"));
        out << R"({"kind": "remote"})";
    }
    REQUIRE_THROWS_AS(load_backend_config(dir.file("bad.json")), ValidationError);
}
