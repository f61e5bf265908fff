#include "irasm/executor.hpp"

#include <unistd.h>

#include <atomic>
#include <cstring>
#include <sstream>

#include "irasm/errors.hpp"
#include "irasm/subprocess.hpp"
#include "irasm/util.hpp"

namespace irasm {

namespace {

std::filesystem::path make_scratch_dir() {
    auto base = std::filesystem::temp_directory_path() / "irasm-run";
    std::filesystem::create_directories(base);
    // Uniqueness via a counter in the template keeps this header-light.
    static std::atomic<unsigned long long> counter{0};
    auto dir = base / std::to_string(counter.fetch_add(1) + (unsigned long long)getpid() * 100000ULL);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string first_divergence(const std::vector<std::string>& expected,
                             const std::vector<std::string>& actual) {
    const std::size_t n = std::min(expected.size(), actual.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (expected[i] != actual[i]) {
            std::ostringstream out;
            out << "first divergence at line " << (i + 1) << "\n"
                << "expected (reference): " << expected[i] << "\n"
                << "actual   (candidate): " << actual[i];
            return out.str();
        }
    }
    std::ostringstream out;
    if (expected.size() > actual.size()) {
        out << "candidate output ended early at line " << (actual.size() + 1) << "\n"
            << "expected (reference): " << expected[actual.size()] << "\n"
            << "actual   (candidate): <missing>";
    } else {
        out << "candidate produced extra output at line " << (expected.size() + 1) << "\n"
            << "expected (reference): <end of output>\n"
            << "actual   (candidate): " << actual[expected.size()];
    }
    return out.str();
}

}  // namespace

const char* to_string(VerdictStatus status) {
    switch (status) {
        case VerdictStatus::Pass: return "Pass";
        case VerdictStatus::WrongOutput: return "WrongOutput";
        case VerdictStatus::RuntimeCrash: return "RuntimeCrash";
        case VerdictStatus::Timeout: return "Timeout";
        case VerdictStatus::AssembleFail: return "AssembleFail";
        case VerdictStatus::LinkFail: return "LinkFail";
        case VerdictStatus::ExtractFail: return "ExtractFail";
    }
    return "Pass";
}

Verdict pass_verdict() {
    return Verdict{VerdictStatus::Pass, std::nullopt};
}

Verdict fail_verdict(VerdictStatus status, FailureDiagnostics diag) {
    return Verdict{status, std::move(diag)};
}

RunResult run(const BuildProduct& executable, const ExecutionLimits& limits,
              const std::vector<std::string>& emulator_prefix) {
    if (!executable.success) {
        throw SpawnError("attempted to run a failed build");
    }

    SpawnSpec spec;
    spec.argv = emulator_prefix;
    spec.argv.push_back(std::filesystem::absolute(executable.executable_path).string());
    spec.working_dir = limits.working_dir.empty() ? make_scratch_dir() : limits.working_dir;
    spec.env = scrubbed_env();
    spec.timeout = limits.wall_timeout;
    spec.max_output_bytes = limits.max_output_bytes;

    ProcessResult proc = run_process(spec);
    if (proc.exec_failed) {
        throw SpawnError("binary not runnable on this host: " +
                         executable.executable_path.string() + " (" +
                         std::strerror(proc.exec_errno) + ")");
    }

    RunResult result;
    result.stdout_data = std::move(proc.stdout_data);
    result.stderr_data = std::move(proc.stderr_data);
    result.exit_code = proc.exit_code;
    result.wall_time = proc.wall_time;
    result.timed_out = proc.timed_out;
    result.crashed = proc.signaled;
    result.term_signal = proc.term_signal;
    result.output_truncated = proc.stdout_truncated || proc.stderr_truncated;
    return result;
}

Verdict check_correctness(const RunResult& candidate, const RunResult& reference,
                          CheckerMode checker) {
    if (reference.timed_out || reference.crashed) {
        throw OracleInvalid("reference run is not a valid oracle (crashed or timed out)");
    }

    if (candidate.timed_out) {
        FailureDiagnostics diag;
        diag.stage = FailureStage::run_timeout;
        diag.excerpt = "execution exceeded the wall timeout";
        return fail_verdict(VerdictStatus::Timeout, std::move(diag));
    }
    if (candidate.crashed) {
        FailureDiagnostics diag;
        diag.stage = FailureStage::run_crash;
        std::ostringstream out;
        out << "terminated by signal " << candidate.term_signal;
        if (!candidate.stderr_data.empty()) {
            out << "\nstderr:\n" << util::elide_middle(candidate.stderr_data, 2048);
        }
        diag.excerpt = out.str();
        diag.exit_code = candidate.exit_code;
        return fail_verdict(VerdictStatus::RuntimeCrash, std::move(diag));
    }

    const auto expected_lines = util::split_lines(reference.stdout_data);
    const auto actual_lines = util::split_lines(candidate.stdout_data);

    bool ok = false;
    if (checker == CheckerMode::stdout_exact) {
        ok = candidate.exit_code == reference.exit_code &&
             candidate.stdout_data == reference.stdout_data;
    } else {
        ok = expected_lines == actual_lines;
    }
    if (ok) {
        return pass_verdict();
    }

    FailureDiagnostics diag;
    diag.stage = FailureStage::wrong_output;
    diag.exit_code = candidate.exit_code;
    if (checker == CheckerMode::stdout_exact && candidate.exit_code != reference.exit_code &&
        candidate.stdout_data == reference.stdout_data) {
        diag.excerpt = "exit code differs: expected " + std::to_string(reference.exit_code) +
                       ", got " + std::to_string(candidate.exit_code);
    } else {
        diag.excerpt = util::elide_middle(first_divergence(expected_lines, actual_lines), 4096);
    }
    return fail_verdict(VerdictStatus::WrongOutput, std::move(diag));
}

}  // namespace irasm
