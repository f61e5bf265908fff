#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "irasm/chat.hpp"

namespace irasm {

// One provider backend. Implementations throw AuthError / ProviderError /
// ReplayExhausted; the Gateway layers caching on top.
class Transport {
public:
    virtual ~Transport() = default;
    virtual ChatResponse send(const ChatRequest& request) = 0;
};

std::unique_ptr<Transport> make_http_transport(const ProviderConfig& config);
std::unique_ptr<Transport> make_replay_transport(const ProviderConfig& config);

// Parsed replay script: ordered response steps per conversation id.
struct ReplayStep {
    std::string hint;      // "*" or empty matches anything
    std::string content;
};

std::map<std::string, std::vector<ReplayStep>> parse_replay_script(const std::string& text);

class Gateway {
public:
    explicit Gateway(ProviderConfig config);
    Gateway(ProviderConfig config, std::unique_ptr<Transport> transport);

    // Serves from the response cache when the request was seen before
    // (http providers only); otherwise delegates to the transport and, on
    // success, persists the response.
    ChatResponse complete(const ChatRequest& request);

    const ProviderConfig& config() const { return config_; }

private:
    ProviderConfig config_;
    std::unique_ptr<Transport> transport_;
    std::mutex mutex_;
};

// Spec-shaped one-shot entry point; builds a Gateway per call (no cross-call
// replay state, so prefer a long-lived Gateway for replay providers).
ChatResponse complete(const ChatRequest& request, const ProviderConfig& config);

}  // namespace irasm
