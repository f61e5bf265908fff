#pragma once

#include <chrono>
#include <filesystem>
#include <vector>

#include "irasm/executor.hpp"
#include "irasm/toolchain.hpp"

namespace irasm {

struct TimingSeries {
    std::vector<std::chrono::nanoseconds> runs;  // execution order
    int n_total = 11;
};

struct PerfComparison {
    std::chrono::nanoseconds runtime_llm{0};
    std::chrono::nanoseconds runtime_o3{0};
    double speedup = 0.0;   // runtime_o3 / runtime_llm
};

// Machine-wide mutual exclusion for timed runs, held via flock(2) on a lock
// file. Everything else may proceed concurrently around it.
class ExclusiveTimingLock {
public:
    explicit ExclusiveTimingLock(const std::filesystem::path& lock_file);
    ~ExclusiveTimingLock();
    ExclusiveTimingLock(const ExclusiveTimingLock&) = delete;
    ExclusiveTimingLock& operator=(const ExclusiveTimingLock&) = delete;

private:
    int fd_ = -1;
};

// Runs the binary n times sequentially and records each wall time in
// execution order. Aborts with MeasurementError (1-based failing index) if
// any run crashes or times out; a verified-correct program should not.
TimingSeries measure(const BuildProduct& executable, const ExecutionLimits& limits, int n = 11,
                     const std::vector<std::string>& emulator_prefix = {});

// Measures two binaries with their runs interleaved (a1 b1 a2 b2 ...), so
// both series sample the same machine-noise windows. Each binary still gets
// an n-run series in its own execution order; host-speed drift between
// adjacent windows then cancels out of the ratio of their medians.
std::pair<TimingSeries, TimingSeries> measure_interleaved(
    const BuildProduct& a, const BuildProduct& b, const ExecutionLimits& limits, int n = 11,
    const std::vector<std::string>& emulator_prefix = {});

// The 11-run protocol: discard runs 1-3 (warm-up) and 9-11 (cool-down) by
// execution order, keep runs 4-8, return the magnitude median of those five.
// Defined only for 11-run series; anything else is a ProtocolError.
std::chrono::nanoseconds median_protocol(const TimingSeries& series);

// runtime_o3 / runtime_llm; > 1 means the candidate outruns the -O3 binary.
// The superior-performance predicate is strictly speedup > 1.
double speedup(std::chrono::nanoseconds runtime_o3, std::chrono::nanoseconds runtime_llm);

PerfComparison compare_perf(std::chrono::nanoseconds runtime_o3,
                            std::chrono::nanoseconds runtime_llm);

// Persists one series as structured text: run index, nanoseconds, kept flag.
void write_timing_record(const TimingSeries& series, const std::filesystem::path& path);

}  // namespace irasm
