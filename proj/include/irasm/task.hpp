#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace irasm {

enum class ArchName { x86_64, aarch64 };
enum class ExecutionMode { native, emulated };
enum class TaskLevel { L1, L2 };
enum class CheckerMode { stdout_exact, checksum_lines };

struct ArchTarget {
    ArchName name = ArchName::x86_64;
    ExecutionMode execution_mode = ExecutionMode::native;
};

const char* to_string(ArchName name);
const char* to_string(TaskLevel level);
const char* to_string(CheckerMode mode);
ArchName parse_arch_name(const std::string& text);        // throws ValidationError
ExecutionMode parse_execution_mode(const std::string& text);

// One benchmark unit: the IR under translation plus the C harness that calls
// it and prints the observable output.
struct TaskSpec {
    std::string id;
    TaskLevel level = TaskLevel::L1;
    std::string ir_text;
    std::string driver_source;
    CheckerMode checker = CheckerMode::stdout_exact;
    std::optional<std::uint64_t> seed;   // required for L2
    std::chrono::milliseconds timeout{10000};
};

struct DatasetManifest {
    std::string dataset_name;
    std::vector<TaskSpec> tasks;   // iteration order == file order
    ArchTarget arch;
    // Task directory paths as written in the manifest, parallel to `tasks`.
    std::vector<std::string> task_dirs;
};

struct SplitAssignment {
    std::vector<std::string> train;
    std::vector<std::string> validation;
    std::vector<std::string> test;
};

// Loads and validates a manifest file. The manifest is line-based key/value
// plus repeated `task = <dir>` entries naming task directories (relative to
// the manifest file); each directory holds task.meta, func.ll and driver.c.
DatasetManifest load_manifest(const std::filesystem::path& path);

// Writes the manifest back out (task.meta/func.ll/driver.c files included),
// rooted at `dir`. load_manifest(serialize_manifest(m)) == m.
std::filesystem::path serialize_manifest(const DatasetManifest& manifest,
                                         const std::filesystem::path& dir);

struct SplitCounts {
    std::size_t train = 0;
    std::size_t validation = 0;
    std::size_t test = 0;
};

// Deterministic seeded split: Fisher-Yates over the manifest order driven by
// splitmix64, then consecutive slices of the shuffled ids.
SplitAssignment split_dataset(const DatasetManifest& manifest, SplitCounts counts,
                              std::uint64_t seed);

SplitAssignment load_split_file(const std::filesystem::path& path);
void save_split_file(const SplitAssignment& split, const std::filesystem::path& path);

const TaskSpec* find_task(const DatasetManifest& manifest, const std::string& id);

// Optional helper (not part of the pipeline): manifest-order indices sorted
// by descending IR line count.
std::vector<std::size_t> indices_by_ir_length(const DatasetManifest& manifest);

}  // namespace irasm
