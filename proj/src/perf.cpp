#include "irasm/perf.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <sstream>

#include "irasm/errors.hpp"
#include "irasm/util.hpp"

namespace irasm {

ExclusiveTimingLock::ExclusiveTimingLock(const std::filesystem::path& lock_file) {
    if (lock_file.has_parent_path()) {
        std::filesystem::create_directories(lock_file.parent_path());
    }
    fd_ = open(lock_file.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ < 0) {
        throw IoError("cannot open timing lock file: " + lock_file.string());
    }
    if (flock(fd_, LOCK_EX) != 0) {
        close(fd_);
        fd_ = -1;
        throw IoError("cannot acquire timing lock: " + lock_file.string());
    }
}

ExclusiveTimingLock::~ExclusiveTimingLock() {
    if (fd_ >= 0) {
        flock(fd_, LOCK_UN);
        close(fd_);
    }
}

TimingSeries measure(const BuildProduct& executable, const ExecutionLimits& limits, int n,
                     const std::vector<std::string>& emulator_prefix) {
    if (n <= 0) {
        throw DomainError("measurement run count must be positive");
    }
    TimingSeries series;
    series.n_total = n;
    series.runs.reserve(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) {
        RunResult res = run(executable, limits, emulator_prefix);
        if (res.timed_out) {
            throw MeasurementError("run " + std::to_string(i) + " timed out during measurement", i);
        }
        if (res.crashed) {
            throw MeasurementError("run " + std::to_string(i) + " crashed during measurement", i);
        }
        series.runs.push_back(res.wall_time);
    }
    return series;
}

std::pair<TimingSeries, TimingSeries> measure_interleaved(
    const BuildProduct& a, const BuildProduct& b, const ExecutionLimits& limits, int n,
    const std::vector<std::string>& emulator_prefix) {
    if (n <= 0) {
        throw DomainError("measurement run count must be positive");
    }
    TimingSeries series_a, series_b;
    series_a.n_total = n;
    series_b.n_total = n;
    for (int i = 1; i <= n; ++i) {
        for (auto* side : {&series_a, &series_b}) {
            const BuildProduct& bin = side == &series_a ? a : b;
            RunResult res = run(bin, limits, emulator_prefix);
            if (res.timed_out || res.crashed) {
                throw MeasurementError("run " + std::to_string(i) + " of " +
                                           bin.executable_path.filename().string() +
                                           (res.timed_out ? " timed out" : " crashed") +
                                           " during measurement",
                                       i);
            }
            side->runs.push_back(res.wall_time);
        }
    }
    return {series_a, series_b};
}

std::chrono::nanoseconds median_protocol(const TimingSeries& series) {
    if (series.n_total != 11 || series.runs.size() != 11) {
        throw ProtocolError("timing protocol requires exactly 11 runs, got " +
                            std::to_string(series.runs.size()));
    }
    // Runs are 1-based by execution order; keep 4..8.
    std::vector<std::chrono::nanoseconds> kept(series.runs.begin() + 3, series.runs.begin() + 8);
    std::sort(kept.begin(), kept.end());
    return kept[2];
}

double speedup(std::chrono::nanoseconds runtime_o3, std::chrono::nanoseconds runtime_llm) {
    if (runtime_o3.count() <= 0 || runtime_llm.count() <= 0) {
        throw DomainError("speedup requires positive runtimes");
    }
    return static_cast<double>(runtime_o3.count()) / static_cast<double>(runtime_llm.count());
}

PerfComparison compare_perf(std::chrono::nanoseconds runtime_o3,
                            std::chrono::nanoseconds runtime_llm) {
    PerfComparison cmp;
    cmp.runtime_o3 = runtime_o3;
    cmp.runtime_llm = runtime_llm;
    cmp.speedup = speedup(runtime_o3, runtime_llm);
    return cmp;
}

void write_timing_record(const TimingSeries& series, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "# run_index duration_ns kept\n";
    for (std::size_t i = 0; i < series.runs.size(); ++i) {
        const std::size_t idx = i + 1;
        const bool kept = series.runs.size() == 11 && idx >= 4 && idx <= 8;
        out << idx << ' ' << series.runs[i].count() << ' ' << (kept ? "kept" : "discarded")
            << '\n';
    }
    util::write_file(path, out.str());
}

}  // namespace irasm
