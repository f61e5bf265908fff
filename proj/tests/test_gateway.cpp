#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "irasm/errors.hpp"
#include "irasm/gateway.hpp"
#include "irasm/util.hpp"
#include "support.hpp"

using namespace irasm;

namespace {

ChatRequest simple_request(const std::string& text, const std::string& conversation = "c1") {
    ChatRequest req;
    req.model = "m";
    req.messages = {ChatMessage{ChatRole::user, text}};
    req.conversation = conversation;
    return req;
}

}  // namespace

TEST_CASE("gateway: replay script parses conversations, steps and bodies") {
    const std::string script =
        "# comment\n"
        "@conversation a:gen\n"
        "@step hello\n"
        "<<<\n"
        "line one\n"
        "line two\n"
        ">>>\n"
        "@step *\n"
        "<<<\n"
        "second\n"
        ">>>\n"
        "@conversation b:gen\n"
        "@step *\n"
        "<<<\n"
        "other\n"
        ">>>\n";
    auto parsed = parse_replay_script(script);
    REQUIRE(parsed.count("a:gen") == 1);
    REQUIRE(parsed.at("a:gen").size() == 2);
    CHECK(parsed.at("a:gen")[0].hint == "hello");
    CHECK(parsed.at("a:gen")[0].content == "line one\nline two");
    CHECK(parsed.at("b:gen")[0].content == "other");
}

TEST_CASE("gateway: replay serves steps in order and exhausts") {
    auto dir = testsupport::fresh_scratch("replay");
    util::write_file(dir / "s.replay",
                     "@conversation c1\n@step *\n<<<\nfirst\n>>>\n@step *\n<<<\nsecond\n>>>\n");
    ProviderConfig config;
    config.kind = ProviderKind::replay;
    config.replay_script = dir / "s.replay";
    Gateway gateway(config);

    ChatResponse r1 = gateway.complete(simple_request("x"));
    CHECK(r1.content == "first");
    CHECK_FALSE(r1.cached);
    CHECK(r1.provider == "replay");
    ChatResponse r2 = gateway.complete(simple_request("x"));
    CHECK(r2.content == "second");
    CHECK_THROWS_AS(gateway.complete(simple_request("x")), ReplayExhausted);
    CHECK_THROWS_AS(gateway.complete(simple_request("x", "unknown")), ReplayExhausted);
}

TEST_CASE("gateway: replay hint mismatch is an error") {
    auto dir = testsupport::fresh_scratch("replay-hint");
    util::write_file(dir / "s.replay",
                     "@conversation c1\n@step needle\n<<<\nbody\n>>>\n");
    ProviderConfig config;
    config.kind = ProviderKind::replay;
    config.replay_script = dir / "s.replay";
    Gateway gateway(config);
    CHECK_THROWS_AS(gateway.complete(simple_request("no match here")), ReplayMismatch);
}

TEST_CASE("gateway: request validation") {
    ProviderConfig config;
    config.kind = ProviderKind::replay;
    config.replay_script = "/nonexistent";
    ChatRequest req;
    req.model = "m";
    CHECK_THROWS_AS(validate(req), ValidationError);          // no messages
    req.messages = {ChatMessage{ChatRole::assistant, "x"}};
    CHECK_THROWS_AS(validate(req), ValidationError);          // last not user
    req.messages = {ChatMessage{ChatRole::user, ""}};
    CHECK_THROWS_AS(validate(req), ValidationError);          // empty user content
}

TEST_CASE("gateway: canonical digest ignores conversation id") {
    ChatRequest a = simple_request("same", "conv-a");
    ChatRequest b = simple_request("same", "conv-b");
    CHECK(request_digest(a) == request_digest(b));
    ChatRequest c = simple_request("different", "conv-a");
    CHECK(request_digest(a) != request_digest(c));
}

namespace {

struct TestServer {
    httplib::Server server;
    int port = 0;
    std::thread thread;
    std::atomic<int> hits{0};

    explicit TestServer(std::function<void(const httplib::Request&, httplib::Response&, int)> fn) {
        server.Post("/v1/chat/completions",
                    [this, fn](const httplib::Request& req, httplib::Response& res) {
                        fn(req, res, hits.fetch_add(1) + 1);
                    });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this]() { server.listen_after_bind(); });
        server.wait_until_ready();
    }

    ~TestServer() {
        server.stop();
        thread.join();
    }

    ProviderConfig config(const std::filesystem::path& cache_dir = {}) const {
        ProviderConfig cfg;
        cfg.kind = ProviderKind::http;
        cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
        cfg.api_key_env = "IRASM_TEST_KEY";
        cfg.retry_limit = 3;
        cfg.backoff_base = std::chrono::milliseconds(5);
        cfg.cache_dir = cache_dir;
        return cfg;
    }
};

std::string ok_body(const std::string& content) {
    nlohmann::json doc;
    doc["choices"] = {{{"message", {{"role", "assistant"}, {"content", content}}}}};
    doc["usage"] = {{"prompt_tokens", 12}, {"completion_tokens", 34}};
    doc["model"] = "test-model";
    return doc.dump();
}

}  // namespace

TEST_CASE("gateway: http happy path parses content and usage") {
    setenv("IRASM_TEST_KEY", "sekrit", 1);
    TestServer server([](const httplib::Request& req, httplib::Response& res, int) {
        CHECK(req.get_header_value("Authorization") == "Bearer sekrit");
        auto body = nlohmann::json::parse(req.body);
        CHECK(body["model"] == "m");
        res.set_content(ok_body("hello back"), "application/json");
    });
    Gateway gateway(server.config());
    ChatResponse resp = gateway.complete(simple_request("hi"));
    CHECK(resp.content == "hello back");
    CHECK(resp.prompt_tokens == 12);
    CHECK(resp.completion_tokens == 34);
    CHECK_FALSE(resp.cached);
}

TEST_CASE("gateway: missing api key is AuthError") {
    unsetenv("IRASM_TEST_KEY");
    TestServer server([](const httplib::Request&, httplib::Response& res, int) {
        res.set_content(ok_body("x"), "application/json");
    });
    Gateway gateway(server.config());
    CHECK_THROWS_AS(gateway.complete(simple_request("hi")), AuthError);
    CHECK(server.hits.load() == 0);
}

TEST_CASE("gateway: persistent 500 gives ProviderError after retry_limit+1 attempts") {
    setenv("IRASM_TEST_KEY", "k", 1);
    TestServer server([](const httplib::Request&, httplib::Response& res, int) {
        res.status = 500;
        res.set_content("boom", "text/plain");
    });
    Gateway gateway(server.config());
    CHECK_THROWS_AS(gateway.complete(simple_request("hi")), ProviderError);
    CHECK(server.hits.load() == 4);  // 1 + retry_limit(3)
}

TEST_CASE("gateway: transient 500s then success") {
    setenv("IRASM_TEST_KEY", "k", 1);
    TestServer server([](const httplib::Request&, httplib::Response& res, int hit) {
        if (hit <= 2) {
            res.status = 500;
        } else {
            res.set_content(ok_body("recovered"), "application/json");
        }
    });
    Gateway gateway(server.config());
    CHECK(gateway.complete(simple_request("hi")).content == "recovered");
    CHECK(server.hits.load() == 3);
}

TEST_CASE("gateway: 401 is AuthError, not retried") {
    setenv("IRASM_TEST_KEY", "k", 1);
    TestServer server([](const httplib::Request&, httplib::Response& res, int) {
        res.status = 401;
    });
    Gateway gateway(server.config());
    CHECK_THROWS_AS(gateway.complete(simple_request("hi")), AuthError);
    CHECK(server.hits.load() == 1);
}

TEST_CASE("gateway: identical request is served from cache, one network call ever") {
    setenv("IRASM_TEST_KEY", "k", 1);
    auto cache = testsupport::fresh_scratch("cache");
    TestServer server([](const httplib::Request&, httplib::Response& res, int) {
        res.set_content(ok_body("cached payload"), "application/json");
    });
    Gateway gateway(server.config(cache));
    ChatResponse first = gateway.complete(simple_request("hi"));
    CHECK_FALSE(first.cached);
    ChatResponse second = gateway.complete(simple_request("hi"));
    CHECK(second.cached);
    CHECK(second.content == first.content);
    CHECK(server.hits.load() == 1);

    // Cache layout: cache/<first-2-hex>/<hash>.resp
    const std::string digest = request_digest(simple_request("hi"));
    CHECK(std::filesystem::exists(cache / digest.substr(0, 2) / (digest + ".resp")));

    // A fresh gateway over the same cache directory also hits the cache.
    Gateway gateway2(server.config(cache));
    CHECK(gateway2.complete(simple_request("hi")).cached);
    CHECK(server.hits.load() == 1);
}
