#include "irasm/toolchain.hpp"

#include <map>
#include <mutex>
#include <sstream>

#include "irasm/errors.hpp"
#include "irasm/subprocess.hpp"
#include "irasm/util.hpp"

namespace irasm {

namespace {

constexpr std::chrono::milliseconds kToolTimeout{120000};

std::string join_argv(const std::vector<std::string>& argv) {
    std::string out;
    for (std::size_t i = 0; i < argv.size(); ++i) {
        if (i) out.push_back(' ');
        out += argv[i];
    }
    return out;
}

// Runs one tool invocation, appending the verbatim command line and its
// stderr to `log`. Returns the exit code.
int run_tool(const std::vector<std::string>& argv, std::string& log) {
    SpawnSpec spec;
    spec.argv = argv;
    spec.timeout = kToolTimeout;
    spec.max_output_bytes = 1 << 20;
    log += "$ " + join_argv(argv) + "\n";
    ProcessResult res = run_process(spec);
    if (!res.stderr_data.empty()) {
        log += res.stderr_data;
        if (res.stderr_data.back() != '\n') log.push_back('\n');
    }
    if (res.timed_out) {
        log += "(tool timed out)\n";
        return -1;
    }
    return res.exit_code;
}

std::vector<std::string> base_compile_argv(const ToolchainConfig& config) {
    std::vector<std::string> argv{config.compiler_path.string()};
    if (!config.target_triple.empty()) {
        argv.push_back("--target=" + config.target_triple);
    }
    for (const auto& flag : config.extra_flags) argv.push_back(flag);
    return argv;
}

// The driver is always compiled at -O0 so every binary for a task shares
// identical harness code; the requested opt level applies to the kernel only.
std::filesystem::path compile_driver(const TaskSpec& task, const ToolchainConfig& config,
                                     const std::filesystem::path& dir, std::string& log) {
    const auto src = dir / "driver.c";
    const auto obj = dir / "driver.o";
    util::write_file(src, task.driver_source);
    auto argv = base_compile_argv(config);
    argv.push_back("-O0");
    if (task.seed) {
        argv.push_back("-DSEED=" + std::to_string(*task.seed) + "ULL");
    }
    argv.insert(argv.end(), {"-c", src.string(), "-o", obj.string()});
    if (run_tool(argv, log) != 0) {
        return {};
    }
    return obj;
}

}  // namespace

const char* to_string(BuildKind kind) {
    switch (kind) {
        case BuildKind::reference_O0: return "reference_O0";
        case BuildKind::reference_O3: return "reference_O3";
        case BuildKind::candidate: return "candidate";
    }
    return "candidate";
}

const char* to_string(FailureStage stage) {
    switch (stage) {
        case FailureStage::assemble: return "assemble";
        case FailureStage::link: return "link";
        case FailureStage::run_crash: return "run_crash";
        case FailureStage::run_timeout: return "run_timeout";
        case FailureStage::wrong_output: return "wrong_output";
        case FailureStage::extract: return "extract";
    }
    return "assemble";
}

bool toolchain_available(const ToolchainConfig& config) {
    // One probe per compiler path per process; builds are frequent.
    static std::mutex mutex;
    static std::map<std::string, bool> probed;
    const std::string key = config.compiler_path.string();
    {
        std::lock_guard<std::mutex> lock(mutex);
        if (auto it = probed.find(key); it != probed.end()) return it->second;
    }
    bool ok = false;
    try {
        SpawnSpec spec;
        spec.argv = {key, "--version"};
        spec.timeout = std::chrono::milliseconds(15000);
        ProcessResult res = run_process(spec);
        ok = !res.exec_failed && res.exit_code == 0;
    } catch (const SpawnError&) {
        ok = false;
    }
    std::lock_guard<std::mutex> lock(mutex);
    probed[key] = ok;
    return ok;
}

BuildProduct build_reference(const TaskSpec& task, const std::string& opt,
                             const ToolchainConfig& config) {
    if (!toolchain_available(config)) {
        throw ToolchainMissing("compiler not runnable: " + config.compiler_path.string());
    }
    BuildProduct product;
    product.kind = (opt == config.opt_level_optimized) ? BuildKind::reference_O3
                                                       : BuildKind::reference_O0;
    const auto dir = config.work_dir / task.id / ("ref" + opt);
    std::filesystem::create_directories(dir);

    const auto ir_path = dir / "func.ll";
    util::write_file(ir_path, task.ir_text);

    const auto kernel_obj = dir / "func.o";
    auto argv = base_compile_argv(config);
    argv.insert(argv.end(), {"-x", "ir", opt, "-c", ir_path.string(), "-o", kernel_obj.string()});
    if (run_tool(argv, product.build_log) != 0) {
        product.success = false;
        return product;
    }

    const auto driver_obj = compile_driver(task, config, dir, product.build_log);
    if (driver_obj.empty()) {
        product.success = false;
        return product;
    }

    const auto exe = dir / "ref";
    auto link_argv = base_compile_argv(config);
    link_argv.insert(link_argv.end(),
                     {kernel_obj.string(), driver_obj.string(), "-o", exe.string()});
    if (run_tool(link_argv, product.build_log) != 0) {
        product.success = false;
        return product;
    }

    product.executable_path = exe;
    product.success = true;
    return product;
}

std::variant<BuildProduct, FailureDiagnostics> build_candidate(const TaskSpec& task,
                                                               const std::string& asm_text,
                                                               const ToolchainConfig& config,
                                                               const std::string& attempt_tag) {
    if (!toolchain_available(config)) {
        throw ToolchainMissing("compiler not runnable: " + config.compiler_path.string());
    }
    if (asm_text.empty()) {
        throw ValidationError("candidate assembly text is empty");
    }
    const auto dir = config.work_dir / task.id / ("cand-" + attempt_tag);
    std::filesystem::create_directories(dir);

    BuildProduct product;
    product.kind = BuildKind::candidate;

    // Persisted byte-for-byte; the pipeline never rewrites model output.
    const auto asm_path = dir / "candidate.s";
    util::write_file(asm_path, asm_text);

    const auto obj = dir / "candidate.o";
    {
        auto argv = base_compile_argv(config);
        argv.insert(argv.end(), {"-c", asm_path.string(), "-o", obj.string()});
        std::string log;
        int rc = run_tool(argv, log);
        product.build_log += log;
        if (rc != 0) {
            FailureDiagnostics diag;
            diag.stage = FailureStage::assemble;
            diag.excerpt = util::elide_middle(log, 4096);
            diag.exit_code = rc;
            return diag;
        }
    }

    const auto driver_obj = compile_driver(task, config, dir, product.build_log);
    if (driver_obj.empty()) {
        // The driver is fixture code; failing to build it is an operational
        // problem, not a model mistake.
        throw ReferenceBuildFailure("driver failed to compile for task '" + task.id +
                                    "':\n" + product.build_log);
    }

    const auto exe = dir / "candidate";
    {
        auto argv = base_compile_argv(config);
        argv.insert(argv.end(), {obj.string(), driver_obj.string(), "-o", exe.string()});
        std::string log;
        int rc = run_tool(argv, log);
        product.build_log += log;
        if (rc != 0) {
            FailureDiagnostics diag;
            diag.stage = FailureStage::link;
            diag.excerpt = util::elide_middle(log, 4096);
            diag.exit_code = rc;
            return diag;
        }
    }

    product.executable_path = exe;
    product.success = true;
    return product;
}

}  // namespace irasm
