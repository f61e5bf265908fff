#include "irasm/gateway.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "irasm/errors.hpp"
#include "irasm/util.hpp"

namespace irasm {

namespace {

using nlohmann::json;

struct EndpointParts {
    std::string base;   // scheme://host[:port]
    std::string path;   // /v1/chat/completions
};

EndpointParts split_endpoint(const std::string& endpoint) {
    auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) {
        throw ValidationError("endpoint must include a scheme: " + endpoint);
    }
    auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {endpoint, "/"};
    }
    return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

class HttpTransport final : public Transport {
public:
    explicit HttpTransport(ProviderConfig config) : config_(std::move(config)) {}

    ChatResponse send(const ChatRequest& request) override {
        const char* key = std::getenv(config_.api_key_env.c_str());
        if (key == nullptr || *key == '\0') {
            throw AuthError("API key environment variable not set: " + config_.api_key_env);
        }

        json body;
        body["model"] = request.model;
        json msgs = json::array();
        for (const auto& m : request.messages) {
            msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
        }
        body["messages"] = std::move(msgs);
        body["temperature"] = request.temperature;
        body["max_tokens"] = request.max_tokens;
        const std::string payload = body.dump();

        const EndpointParts parts = split_endpoint(config_.endpoint);
        httplib::Client client(parts.base);
        client.set_connection_timeout(30, 0);
        client.set_read_timeout(600, 0);
        httplib::Headers headers = {{"Authorization", std::string("Bearer ") + key}};

        const int attempts = config_.retry_limit + 1;
        std::string last_failure;
        for (int attempt = 0; attempt < attempts; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(config_.backoff_base * (1LL << (attempt - 1)));
            }
            auto res = client.Post(parts.path, headers, payload, "application/json");
            if (!res) {
                last_failure = "connection failure: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 401 || res->status == 403) {
                throw AuthError("provider rejected credentials (HTTP " +
                                std::to_string(res->status) + ")");
            }
            if (res->status >= 500 || res->status == 429 || res->status == 408) {
                last_failure = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200) {
                throw ProviderError("provider returned HTTP " + std::to_string(res->status) +
                                    ": " + util::elide_middle(res->body, 512));
            }
            return parse_response(res->body);
        }
        throw ProviderError("provider failed after " + std::to_string(attempts) +
                            " attempts (" + last_failure + ")");
    }

private:
    static ChatResponse parse_response(const std::string& body) {
        json doc;
        try {
            doc = json::parse(body);
        } catch (const json::exception& ex) {
            throw ProviderError(std::string("unparseable provider response: ") + ex.what());
        }
        ChatResponse resp;
        try {
            resp.content = doc.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception&) {
            throw ProviderError("provider response missing choices[0].message.content");
        }
        if (doc.contains("usage")) {
            resp.prompt_tokens = doc["usage"].value("prompt_tokens", 0);
            resp.completion_tokens = doc["usage"].value("completion_tokens", 0);
        }
        resp.provider = doc.value("model", std::string("http"));
        return resp;
    }

    ProviderConfig config_;
};

class ReplayTransport final : public Transport {
public:
    explicit ReplayTransport(const ProviderConfig& config) {
        script_ = parse_replay_script(util::read_file(config.replay_script));
        source_ = config.replay_script.string();
    }

    ChatResponse send(const ChatRequest& request) override {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = script_.find(request.conversation);
        if (it == script_.end()) {
            throw ReplayExhausted("replay script " + source_ + " has no conversation '" +
                                  request.conversation + "'");
        }
        std::size_t& cursor = cursors_[request.conversation];
        if (cursor >= it->second.size()) {
            throw ReplayExhausted("replay conversation '" + request.conversation +
                                  "' exhausted after " + std::to_string(cursor) + " steps");
        }
        const ReplayStep& step = it->second[cursor];
        if (!step.hint.empty() && step.hint != "*") {
            const std::string& last = request.messages.back().content;
            if (last.find(step.hint) == std::string::npos) {
                throw ReplayMismatch("replay conversation '" + request.conversation + "' step " +
                                     std::to_string(cursor + 1) + ": request does not contain hint '" +
                                     step.hint + "'");
            }
        }
        ++cursor;
        ChatResponse resp;
        resp.content = step.content;
        resp.provider = "replay";
        return resp;
    }

private:
    std::map<std::string, std::vector<ReplayStep>> script_;
    std::map<std::string, std::size_t> cursors_;
    std::string source_;
    std::mutex mutex_;
};

std::filesystem::path cache_path_for(const std::filesystem::path& dir, const std::string& digest) {
    return dir / digest.substr(0, 2) / (digest + ".resp");
}

}  // namespace

std::map<std::string, std::vector<ReplayStep>> parse_replay_script(const std::string& text) {
    std::map<std::string, std::vector<ReplayStep>> script;
    std::string conversation;
    std::string hint;
    bool in_body = false;
    bool have_step = false;
    std::vector<std::string> body;
    std::size_t line_no = 0;

    auto flush_step = [&]() {
        if (!have_step) return;
        std::string content;
        for (std::size_t i = 0; i < body.size(); ++i) {
            if (i) content.push_back('\n');
            content += body[i];
        }
        script[conversation].push_back({hint, std::move(content)});
        body.clear();
        have_step = false;
    };

    for (const auto& line : util::split_lines(text)) {
        ++line_no;
        if (in_body) {
            if (util::rtrim(line) == ">>>") {
                in_body = false;
                flush_step();
            } else {
                body.push_back(line);
            }
            continue;
        }
        const std::string stripped = util::trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        if (stripped.rfind("@conversation", 0) == 0) {
            flush_step();
            conversation = util::trim(stripped.substr(std::string("@conversation").size()));
            continue;
        }
        if (stripped.rfind("@step", 0) == 0) {
            flush_step();
            hint = util::trim(stripped.substr(std::string("@step").size()));
            have_step = true;
            continue;
        }
        if (stripped == "<<<") {
            if (!have_step) {
                throw ParseError("replay script line " + std::to_string(line_no) +
                                 ": response body without @step");
            }
            in_body = true;
            continue;
        }
        throw ParseError("replay script line " + std::to_string(line_no) +
                         ": unexpected content '" + stripped + "'");
    }
    if (in_body) {
        throw ParseError("replay script ends inside a response body (missing >>>)");
    }
    flush_step();
    return script;
}

Gateway::Gateway(ProviderConfig config) : config_(std::move(config)) {
    validate(config_);
    if (config_.kind == ProviderKind::http) {
        transport_ = make_http_transport(config_);
    } else {
        transport_ = make_replay_transport(config_);
    }
}

Gateway::Gateway(ProviderConfig config, std::unique_ptr<Transport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {}

std::unique_ptr<Transport> make_http_transport(const ProviderConfig& config) {
    return std::make_unique<HttpTransport>(config);
}

std::unique_ptr<Transport> make_replay_transport(const ProviderConfig& config) {
    return std::make_unique<ReplayTransport>(config);
}

ChatResponse Gateway::complete(const ChatRequest& request) {
    validate(request);

    const bool use_cache = config_.kind == ProviderKind::http && !config_.cache_dir.empty();
    std::string digest;
    if (use_cache) {
        digest = request_digest(request);
        const auto path = cache_path_for(config_.cache_dir, digest);
        std::lock_guard<std::mutex> lock(mutex_);
        if (std::filesystem::exists(path)) {
            json doc = json::parse(util::read_file(path));
            ChatResponse resp;
            resp.content = doc.at("content").get<std::string>();
            resp.prompt_tokens = doc.value("prompt_tokens", 0);
            resp.completion_tokens = doc.value("completion_tokens", 0);
            resp.provider = doc.value("provider", std::string());
            resp.cached = true;
            return resp;
        }
    }

    ChatResponse resp = transport_->send(request);

    if (use_cache) {
        json doc;
        doc["content"] = resp.content;
        doc["prompt_tokens"] = resp.prompt_tokens;
        doc["completion_tokens"] = resp.completion_tokens;
        doc["provider"] = resp.provider;
        const auto path = cache_path_for(config_.cache_dir, digest);
        std::lock_guard<std::mutex> lock(mutex_);
        util::write_file_atomic(path, doc.dump());
    }
    return resp;
}

ChatResponse complete(const ChatRequest& request, const ProviderConfig& config) {
    Gateway gateway(config);
    return gateway.complete(request);
}

}  // namespace irasm
