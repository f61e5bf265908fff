#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "irasm/task.hpp"

namespace irasm {

enum class BuildKind { reference_O0, reference_O3, candidate };

struct ToolchainConfig {
    std::filesystem::path compiler_path = "clang";
    std::string opt_level_reference = "-O0";
    std::string opt_level_optimized = "-O3";
    std::vector<std::string> extra_flags;
    std::filesystem::path work_dir;
    // aarch64-on-x86 support: target triple passed to the compiler and the
    // user-mode emulator command prefixed by the executor.
    std::string target_triple;                 // empty = host
    std::vector<std::string> emulator_prefix;  // e.g. {"qemu-aarch64"}
};

struct BuildProduct {
    BuildKind kind = BuildKind::candidate;
    std::filesystem::path executable_path;
    std::string build_log;
    bool success = false;
};

enum class FailureStage { assemble, link, run_crash, run_timeout, wrong_output, extract };

struct FailureDiagnostics {
    FailureStage stage = FailureStage::assemble;
    std::string excerpt;
    std::optional<int> exit_code;
};

const char* to_string(BuildKind kind);
const char* to_string(FailureStage stage);

// Compiles the task's IR at `opt`, the driver at -O0 (with the L2 seed
// define), and links them under work_dir/<subdir>. A failed build raises
// ReferenceBuildFailure; such tasks are excluded from evaluation upstream.
BuildProduct build_reference(const TaskSpec& task, const std::string& opt,
                             const ToolchainConfig& config);

// Assembles the candidate listing byte-for-byte and links it with the task
// driver. Assembler/linker failures are data (they feed the self-debug
// loop), so the result is either a product or diagnostics.
std::variant<BuildProduct, FailureDiagnostics> build_candidate(const TaskSpec& task,
                                                               const std::string& asm_text,
                                                               const ToolchainConfig& config,
                                                               const std::string& attempt_tag);

// True when config.compiler_path resolves to a runnable compiler.
bool toolchain_available(const ToolchainConfig& config);

}  // namespace irasm
