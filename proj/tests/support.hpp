#pragma once

// Shared helpers for the test suites: scripted in-memory provider, stub
// verifiers, scratch directories, fixture paths.

#include <atomic>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "irasm/errors.hpp"
#include "irasm/gateway.hpp"
#include "irasm/pipeline.hpp"

namespace testsupport {

inline std::filesystem::path fixtures_dir() {
    return std::filesystem::path(IRASM_FIXTURES_DIR);
}

inline std::filesystem::path fresh_scratch(const std::string& tag) {
    static std::atomic<int> counter{0};
    auto dir = std::filesystem::path(IRASM_SCRATCH_DIR) /
               (tag + "-" + std::to_string(counter.fetch_add(1)));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// Scripted transport keyed by conversation id, like the replay provider but
// assembled in memory.
class ScriptedTransport final : public irasm::Transport {
public:
    std::map<std::string, std::vector<std::string>> responses;

    irasm::ChatResponse send(const irasm::ChatRequest& request) override {
        auto it = responses.find(request.conversation);
        if (it == responses.end()) {
            throw irasm::ReplayExhausted("no scripted conversation '" + request.conversation +
                                         "'");
        }
        std::size_t& cursor = cursors_[request.conversation];
        if (cursor >= it->second.size()) {
            throw irasm::ReplayExhausted("scripted conversation '" + request.conversation +
                                         "' exhausted");
        }
        irasm::ChatResponse resp;
        resp.content = it->second[cursor++];
        resp.provider = "scripted";
        return resp;
    }

private:
    std::map<std::string, std::size_t> cursors_;
};

inline irasm::Gateway make_scripted_gateway(
    std::map<std::string, std::vector<std::string>> responses) {
    auto transport = std::make_unique<ScriptedTransport>();
    transport->responses = std::move(responses);
    return irasm::Gateway(irasm::ProviderConfig{}, std::move(transport));
}

inline std::string fenced(const std::string& body) {
    return "```assembly\n" + body + "\n```";
}

// Stub verifier: a listing passes iff it contains the marker text.
inline irasm::Verifier marker_verifier(std::string marker = "CORRECT") {
    return [marker](const irasm::TaskSpec&, const std::string& asm_text,
                    const std::string&) -> irasm::VerifyOutcome {
        if (asm_text.find(marker) != std::string::npos) {
            return {irasm::pass_verdict(), irasm::BuildProduct{}};
        }
        irasm::FailureDiagnostics diag;
        diag.stage = irasm::FailureStage::wrong_output;
        diag.excerpt = "expected (reference): 1\nactual   (candidate): 0";
        return {irasm::fail_verdict(irasm::VerdictStatus::WrongOutput, std::move(diag)),
                std::nullopt};
    };
}

inline irasm::TaskSpec tiny_task(const std::string& id = "t1") {
    irasm::TaskSpec task;
    task.id = id;
    task.level = irasm::TaskLevel::L1;
    task.ir_text = "define i32 @f() {\n  ret i32 0\n}\n";
    task.driver_source = "int main(void){return 0;}\n";
    task.checker = irasm::CheckerMode::stdout_exact;
    return task;
}

}  // namespace testsupport
