#pragma once

#include <chrono>
#include <optional>
#include <string>

#include "irasm/task.hpp"
#include "irasm/toolchain.hpp"

namespace irasm {

struct ExecutionLimits {
    std::chrono::milliseconds wall_timeout{10000};
    std::size_t max_output_bytes = 1 << 20;
    std::filesystem::path working_dir;   // empty = fresh temp dir per run
};

struct RunResult {
    std::string stdout_data;
    std::string stderr_data;
    int exit_code = 0;
    std::chrono::nanoseconds wall_time{0};
    bool timed_out = false;
    bool crashed = false;    // signal-terminated (mutually exclusive with timed_out)
    int term_signal = 0;
    bool output_truncated = false;
};

enum class VerdictStatus { Pass, WrongOutput, RuntimeCrash, Timeout, AssembleFail, LinkFail, ExtractFail };

struct Verdict {
    VerdictStatus status = VerdictStatus::Pass;
    std::optional<FailureDiagnostics> diagnostics;   // present iff status != Pass
};

const char* to_string(VerdictStatus status);

Verdict pass_verdict();
Verdict fail_verdict(VerdictStatus status, FailureDiagnostics diag);

// Launches the built binary with empty stdin, a scrubbed environment and the
// configured limits. Throws SpawnError when the binary cannot be started at
// all; candidate misbehavior (crash, timeout) is reported in-band.
// `emulator_prefix` is prepended for emulated targets.
RunResult run(const BuildProduct& executable, const ExecutionLimits& limits,
              const std::vector<std::string>& emulator_prefix = {});

// Differential check against the -O0 reference run. Precedence:
// Timeout > RuntimeCrash > WrongOutput. Throws OracleInvalid when the
// reference run itself crashed or timed out.
Verdict check_correctness(const RunResult& candidate, const RunResult& reference,
                          CheckerMode checker);

}  // namespace irasm
