#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace irasm {

struct SpawnSpec {
    std::vector<std::string> argv;               // argv[0] is the executable (PATH-resolved)
    std::filesystem::path working_dir;           // empty = inherit
    std::optional<std::vector<std::string>> env; // "KEY=VALUE" entries; nullopt = inherit
    std::chrono::milliseconds timeout{0};        // 0 = no timeout
    std::size_t max_output_bytes = 1 << 20;      // per stream
};

struct ProcessResult {
    std::string stdout_data;
    std::string stderr_data;
    int exit_code = -1;          // valid when !signaled
    bool timed_out = false;
    bool signaled = false;       // terminated by a signal (other than our timeout kill)
    int term_signal = 0;
    std::chrono::nanoseconds wall_time{0};
    bool stdout_truncated = false;
    bool stderr_truncated = false;
    bool exec_failed = false;    // exec itself failed (missing/unrunnable binary)
    int exec_errno = 0;
};

// Runs argv with stdin connected to /dev/null, capturing stdout and stderr
// separately. Kills the child at the timeout deadline. Throws SpawnError when
// the process cannot be started at all (missing binary, fork failure);
// everything the child does after a successful exec is reported in-band.
ProcessResult run_process(const SpawnSpec& spec);

// Minimal deterministic child environment: fixed PATH and LC_ALL=C.
std::vector<std::string> scrubbed_env();

}  // namespace irasm
