#include "irasm/chat.hpp"

#include <nlohmann/json.hpp>

#include "irasm/errors.hpp"
#include "irasm/util.hpp"

namespace irasm {

const char* to_string(ChatRole role) {
    switch (role) {
        case ChatRole::system: return "system";
        case ChatRole::user: return "user";
        case ChatRole::assistant: return "assistant";
    }
    return "user";
}

std::string canonical_request_json(const ChatRequest& request) {
    nlohmann::json doc;
    doc["max_tokens"] = request.max_tokens;
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& m : request.messages) {
        msgs.push_back({{"content", m.content}, {"role", to_string(m.role)}});
    }
    doc["messages"] = std::move(msgs);
    doc["model"] = request.model;
    doc["temperature"] = request.temperature;
    return doc.dump();
}

std::string request_digest(const ChatRequest& request) {
    return util::sha256_hex(canonical_request_json(request));
}

void validate(const ChatRequest& request) {
    if (request.messages.empty()) {
        throw ValidationError("chat request has no messages");
    }
    if (request.messages.back().role != ChatRole::user) {
        throw ValidationError("chat request must end with a user message");
    }
    for (const auto& m : request.messages) {
        if (m.role == ChatRole::user && m.content.empty()) {
            throw ValidationError("user message content must be non-empty");
        }
    }
    if (request.temperature < 0.0) {
        throw ValidationError("temperature must be >= 0");
    }
    if (request.max_tokens <= 0) {
        throw ValidationError("max_tokens must be positive");
    }
}

void validate(const ProviderConfig& config) {
    if (config.kind == ProviderKind::http && config.endpoint.empty()) {
        throw ValidationError("http provider requires an endpoint");
    }
    if (config.kind == ProviderKind::replay && config.replay_script.empty()) {
        throw ValidationError("replay provider requires a replay_script");
    }
}

}  // namespace irasm
