#pragma once

#include <optional>
#include <string>

#include "irasm/chat.hpp"
#include "irasm/evolve.hpp"
#include "irasm/pipeline.hpp"
#include "irasm/task.hpp"
#include "irasm/toolchain.hpp"

namespace irasm {

struct SplitSpec {
    std::optional<SplitCounts> counts;
    std::uint64_t seed = 0;
    std::optional<std::filesystem::path> file;   // explicit split file wins
};

struct PromptSource {
    std::optional<std::filesystem::path> file;        // plain prompt text
    std::optional<std::filesystem::path> store_dir;   // prompt store + version id
    std::string version;
};

// Command-line overrides applied on top of the config file.
struct ConfigOverrides {
    std::optional<std::string> arch;
    std::optional<std::string> prompt_file;
    std::optional<std::string> output_dir;
    std::optional<int> jobs;
    bool clean = false;
};

struct ExperimentConfig {
    std::filesystem::path manifest_path;
    std::filesystem::path output_dir;
    ArchTarget arch;                        // effective (manifest value unless overridden)
    bool arch_overridden = false;
    SplitSpec split;
    ProviderConfig provider;
    ModelOptions model;
    PromptSource prompt;

    // Pipeline knobs; unset budget fields fall back to the per-level
    // defaults (L1: 1 round, L2: 2, any aarch64 run: 4).
    std::optional<int> max_debug_rounds_generation;
    std::optional<int> max_debug_rounds_optimization;
    std::optional<int> optimization_rounds;      // default: L1 0, L2 2
    std::optional<bool> measure_each_round;      // default: L2 only
    std::optional<bool> perf_enabled;            // default: L2 only
    bool fresh_context_debug = false;
    int perf_runs = 11;
    int screen_runs = 11;
    std::filesystem::path lock_file;
    std::size_t max_output_bytes = 1 << 20;

    ToolchainConfig toolchain;
    LearnParams learn;
    std::filesystem::path learn_store_dir;
    std::filesystem::path meta_propose_path;
    std::filesystem::path meta_confirm_path;
    int jobs = 1;
    bool clean = false;

    std::string digest;   // sha256 of the canonical effective config
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        const ConfigOverrides& overrides);

// Echoed into the run directory so every artifact links back to its settings.
std::string effective_config_json(const ExperimentConfig& config);

int default_debug_rounds(TaskLevel level, ArchName arch);

// Assembles the per-task pipeline config from the experiment settings.
PipelineConfig pipeline_config_for(const ExperimentConfig& config, const TaskSpec& task);

}  // namespace irasm
