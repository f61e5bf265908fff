#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace irasm {

enum class ChatRole { system, user, assistant };

struct ChatMessage {
    ChatRole role = ChatRole::user;
    std::string content;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int max_tokens = 8192;
    // Bookkeeping only: keys replay scripts and trace records. Not part of
    // the wire payload or the cache key.
    std::string conversation;
};

struct ChatResponse {
    std::string content;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    std::string provider;
    bool cached = false;
};

enum class ProviderKind { http, replay };

struct ProviderConfig {
    ProviderKind kind = ProviderKind::replay;
    std::string endpoint;                        // http: full chat-completions URL
    std::string api_key_env = "IRASM_API_KEY";   // http: env var holding the bearer token
    int retry_limit = 3;                         // http: retries after the first attempt
    std::chrono::milliseconds backoff_base{500}; // http: exponential backoff base
    std::filesystem::path replay_script;         // replay: script file
    std::filesystem::path cache_dir;             // empty = caching off
};

const char* to_string(ChatRole role);

// Canonical serialization of the request identity (model, messages,
// temperature, max_tokens). Input to the cache key and trace digests.
std::string canonical_request_json(const ChatRequest& request);
std::string request_digest(const ChatRequest& request);

void validate(const ChatRequest& request);   // throws ValidationError
void validate(const ProviderConfig& config);

}  // namespace irasm
