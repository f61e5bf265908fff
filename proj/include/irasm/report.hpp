#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace irasm {

// Per-task evaluation outcome. Construct via make_eval_record so the
// correctness/perf consistency rules hold by construction.
struct EvalRecord {
    std::string task_id;
    bool correct = false;
    bool superior_perf = false;
    int debug_rounds_generation = 0;
    std::optional<double> speedup;
    std::string prompt_version;
};

EvalRecord make_eval_record(std::string task_id, bool correct, bool superior_perf,
                            int debug_rounds_generation, std::optional<double> speedup,
                            std::string prompt_version);   // throws ValidationError

struct PercentCounts {
    double percent = 0.0;   // half-up, 2 decimals
    int count = 0;
    int total = 0;
};

struct AggregateReport {
    int n_tasks = 0;
    PercentCounts acc;
    std::optional<PercentCounts> acc_perf;          // absent for L1-style runs
    std::optional<double> avg_debug_rounds_solved;  // absent when nothing solved
    std::vector<EvalRecord> per_task;
    std::string config_digest;
};

// "45.70 (69/151)", percent formatted half-up to two decimals.
std::string format_percent_counts(const PercentCounts& pc);

PercentCounts compute_acc(const std::vector<EvalRecord>& records);       // throws EmptyRecords
PercentCounts compute_acc_perf(const std::vector<EvalRecord>& records);  // throws EmptyRecords
double avg_debug_rounds(const std::vector<EvalRecord>& records);         // throws NoSolvedTasks

AggregateReport aggregate(const std::vector<EvalRecord>& records, bool perf_measured,
                          const std::string& config_digest);

enum class ReportFormat { table, structured };

// Writes report.txt (aligned table) and/or report.json under out_dir and
// returns the files written. The structured form round-trips via
// parse_report.
std::vector<std::filesystem::path> emit_report(const AggregateReport& report,
                                               const std::set<ReportFormat>& formats,
                                               const std::filesystem::path& out_dir);

std::string render_table(const AggregateReport& report);
std::string render_structured(const AggregateReport& report);
AggregateReport parse_report(const std::filesystem::path& path);

}  // namespace irasm
