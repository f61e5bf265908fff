#pragma once

#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "irasm/chat.hpp"
#include "irasm/executor.hpp"
#include "irasm/gateway.hpp"
#include "irasm/perf.hpp"
#include "irasm/task.hpp"
#include "irasm/toolchain.hpp"

namespace irasm {

enum class AttemptKind { initial, debug_fix, optimize };
enum class TraceStage { generation, optimization };

struct Attempt {
    int index = 0;
    AttemptKind kind = AttemptKind::initial;
    std::string request_digest;
    std::optional<std::string> asm_text;     // absent when extraction failed
    Verdict verdict;
    std::optional<std::string> feedback_sent; // the feedback that prompted this fix
};

struct SelfDebugTrace {
    std::string task_id;
    TraceStage stage = TraceStage::generation;
    int optimization_round = 0;               // 1-based when stage == optimization
    std::vector<Attempt> attempts;
    int rounds_used = 0;                       // number of debug_fix attempts
    bool resolved = false;                     // last attempt passed
};

std::string stage_label(const SelfDebugTrace& trace);

struct PipelineConfig {
    int max_debug_rounds_generation = 2;
    int max_debug_rounds_optimization = 2;
    int optimization_rounds = 0;               // T
    bool measure_each_round = true;
    bool measure_perf = false;                 // final comparison against -O3
    ExecutionLimits limits;
    int perf_runs = 11;                        // final protocol length (must be 11)
    int screen_runs = 11;                      // per-round screening length
    std::filesystem::path lock_file = "/tmp/irasm-perf.lock";
    bool fresh_context_debug = false;          // drop prior turns in debug prompts
};

struct BestCandidate {
    std::string asm_text;
    std::optional<std::chrono::nanoseconds> median_runtime;
};

struct TaskOutcome {
    std::string task_id;
    bool correct = false;                      // decided by the generation stage alone
    std::optional<BestCandidate> best_candidate;
    SelfDebugTrace generation_trace;
    std::vector<SelfDebugTrace> optimization_traces;
    std::optional<PerfComparison> perf;
    std::string prompt_version;
};

// Deterministic serialization (sorted keys, no timestamps) used by tests and
// the per-task outcome files.
std::string serialize_outcome(const TaskOutcome& outcome);

struct ModelOptions {
    std::string model = "replay-model";
    double temperature = 0.0;
    int max_tokens = 8192;
};

// Verification of one candidate listing: build, run, differential check.
// Returns the verdict plus the built product when the build succeeded (the
// product of a passing attempt feeds performance measurement).
struct VerifyOutcome {
    Verdict verdict;
    std::optional<BuildProduct> product;
};

using Verifier =
    std::function<VerifyOutcome(const TaskSpec&, const std::string& asm_text,
                                const std::string& attempt_tag)>;

// The production verifier: clang build, execute under limits, compare
// against the supplied -O0 reference run.
Verifier make_toolchain_verifier(const ToolchainConfig& toolchain, const ExecutionLimits& limits,
                                 RunResult reference_run, CheckerMode checker,
                                 std::vector<std::string> emulator_prefix);

// Append-only trajectory log: one JSON line per attempt, flushed before any
// further network call so crashes never lose the learning signal. Safe for
// concurrent task workers.
class TraceSink {
public:
    explicit TraceSink(const std::filesystem::path& path);
    void record(const std::string& task_id, const std::string& stage, const Attempt& attempt);

private:
    std::filesystem::path path_;
    std::mutex mutex_;
};

// Either an extracted listing or the extraction failure for the attempt that
// produced it.
using ExtractedAsm = std::variant<std::string, FailureDiagnostics>;

ExtractedAsm try_extract(const std::string& response_content);

struct LoopServices {
    Gateway* gateway = nullptr;
    ModelOptions model;
    Verifier verify;
    TraceSink* sink = nullptr;        // optional
    bool fresh_context_debug = false;
};

// Verifies the current candidate; while it fails and debug rounds remain,
// feeds the diagnostics back, obtains a corrected listing and repeats.
// Every attempt is recorded. Provider errors propagate (after the trace so
// far has been persisted).
SelfDebugTrace self_debug_loop(const TaskSpec& task, std::vector<ChatMessage> conversation,
                               const std::string& conversation_id, ExtractedAsm first,
                               const std::string& first_digest, int max_rounds,
                               TraceStage stage, int optimization_round,
                               const LoopServices& services);

struct PipelineDeps {
    Gateway* gateway = nullptr;
    ModelOptions model;
    ToolchainConfig toolchain;
    ArchTarget arch;
    TraceSink* sink = nullptr;
    // Namespaces replay conversations (e.g. "e2b1:" during learning) so each
    // logical step maps to exactly one scripted conversation.
    std::string conversation_prefix;
    // Test seams; production leaves these unset.
    std::optional<Verifier> verifier_override;
    std::function<TimingSeries(const BuildProduct&, int)> measure_override;
};

// The full two-stage workflow: initial generation with self-debug; on
// success, up to T optimization rounds, each self-debugged, with the best
// correct candidate selected by measured median runtime.
TaskOutcome neural_compile(const TaskSpec& task, const std::string& prompt_text,
                           const std::string& prompt_version_id, const PipelineConfig& config,
                           const PipelineDeps& deps);

}  // namespace irasm
