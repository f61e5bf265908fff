#include "irasm/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "irasm/errors.hpp"
#include "irasm/util.hpp"

namespace irasm {

namespace {

using nlohmann::json;

constexpr const char* kSchemaTag = "irasm-report/1";

// Half-up rounding to two decimals, done on the percent scale.
double round_percent(double percent) {
    return std::floor(percent * 100.0 + 0.5) / 100.0;
}

std::string two_decimals(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", value);
    return buf;
}

PercentCounts make_counts(int count, int total) {
    PercentCounts pc;
    pc.count = count;
    pc.total = total;
    pc.percent = round_percent(100.0 * static_cast<double>(count) / static_cast<double>(total));
    return pc;
}

}  // namespace

EvalRecord make_eval_record(std::string task_id, bool correct, bool superior_perf,
                            int debug_rounds_generation, std::optional<double> speedup,
                            std::string prompt_version) {
    if (superior_perf && !correct) {
        throw ValidationError("record '" + task_id +
                              "': superior_perf requires correctness");
    }
    if (speedup && !correct) {
        throw ValidationError("record '" + task_id + "': speedup present on a failed task");
    }
    if (debug_rounds_generation < 0) {
        throw ValidationError("record '" + task_id + "': negative debug rounds");
    }
    EvalRecord rec;
    rec.task_id = std::move(task_id);
    rec.correct = correct;
    rec.superior_perf = superior_perf;
    rec.debug_rounds_generation = debug_rounds_generation;
    rec.speedup = speedup;
    rec.prompt_version = std::move(prompt_version);
    return rec;
}

std::string format_percent_counts(const PercentCounts& pc) {
    return two_decimals(pc.percent) + " (" + std::to_string(pc.count) + "/" +
           std::to_string(pc.total) + ")";
}

PercentCounts compute_acc(const std::vector<EvalRecord>& records) {
    if (records.empty()) {
        throw EmptyRecords("compute_acc over zero records");
    }
    int solved = 0;
    for (const auto& r : records) solved += r.correct ? 1 : 0;
    return make_counts(solved, static_cast<int>(records.size()));
}

PercentCounts compute_acc_perf(const std::vector<EvalRecord>& records) {
    if (records.empty()) {
        throw EmptyRecords("compute_acc_perf over zero records");
    }
    int superior = 0;
    for (const auto& r : records) superior += (r.correct && r.superior_perf) ? 1 : 0;
    return make_counts(superior, static_cast<int>(records.size()));
}

double avg_debug_rounds(const std::vector<EvalRecord>& records) {
    int solved = 0;
    long long rounds = 0;
    for (const auto& r : records) {
        if (r.correct) {
            ++solved;
            rounds += r.debug_rounds_generation;
        }
    }
    if (solved == 0) {
        throw NoSolvedTasks("no solved tasks to average debug rounds over");
    }
    return static_cast<double>(rounds) / static_cast<double>(solved);
}

AggregateReport aggregate(const std::vector<EvalRecord>& records, bool perf_measured,
                          const std::string& config_digest) {
    AggregateReport report;
    report.n_tasks = static_cast<int>(records.size());
    report.acc = compute_acc(records);
    if (perf_measured) {
        report.acc_perf = compute_acc_perf(records);
    }
    try {
        report.avg_debug_rounds_solved = avg_debug_rounds(records);
    } catch (const NoSolvedTasks&) {
        report.avg_debug_rounds_solved.reset();
    }
    report.per_task = records;
    report.config_digest = config_digest;
    return report;
}

std::string render_table(const AggregateReport& report) {
    std::ostringstream out;
    out << "==== evaluation report ====\n";
    out << "config digest: " << report.config_digest << "\n";
    out << "tasks:         " << report.n_tasks << "\n";
    out << "ACC (%)        " << format_percent_counts(report.acc) << "\n";
    if (report.acc_perf) {
        out << "ACC+Perf (%)   " << format_percent_counts(*report.acc_perf) << "\n";
    }
    if (report.avg_debug_rounds_solved) {
        out << "avg self-debug rounds (solved): " << two_decimals(*report.avg_debug_rounds_solved)
            << "\n";
    }

    out << "\nper-task results\n";
    std::size_t width = 4;
    for (const auto& r : report.per_task) width = std::max(width, r.task_id.size());
    for (const auto& r : report.per_task) {
        out << "  " << r.task_id << std::string(width - r.task_id.size() + 2, ' ')
            << (r.correct ? "correct  " : "failed   ") << "rounds=" << r.debug_rounds_generation
            << "\n";
    }

    // Speedups descending, mirroring the per-program runtime table layout.
    std::vector<const EvalRecord*> with_speedup;
    for (const auto& r : report.per_task) {
        if (r.speedup) with_speedup.push_back(&r);
    }
    if (!with_speedup.empty()) {
        std::stable_sort(with_speedup.begin(), with_speedup.end(),
                         [](const EvalRecord* a, const EvalRecord* b) {
                             return *a->speedup > *b->speedup;
                         });
        out << "\nper-task speedups (descending)\n";
        for (const auto* r : with_speedup) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.4f", *r->speedup);
            out << "  " << r->task_id << std::string(width - r->task_id.size() + 2, ' ') << buf
                << "\n";
        }
    }
    return out.str();
}

std::string render_structured(const AggregateReport& report) {
    json doc;
    doc["schema"] = kSchemaTag;
    doc["config_digest"] = report.config_digest;
    doc["n_tasks"] = report.n_tasks;
    doc["acc"] = {{"percent", report.acc.percent},
                  {"count", report.acc.count},
                  {"total", report.acc.total},
                  {"display", format_percent_counts(report.acc)}};
    if (report.acc_perf) {
        doc["acc_perf"] = {{"percent", report.acc_perf->percent},
                           {"count", report.acc_perf->count},
                           {"total", report.acc_perf->total},
                           {"display", format_percent_counts(*report.acc_perf)}};
    }
    if (report.avg_debug_rounds_solved) {
        doc["avg_debug_rounds_solved"] = *report.avg_debug_rounds_solved;
    }
    json tasks = json::array();
    for (const auto& r : report.per_task) {
        json t;
        t["task_id"] = r.task_id;
        t["correct"] = r.correct;
        t["superior_perf"] = r.superior_perf;
        t["debug_rounds_generation"] = r.debug_rounds_generation;
        if (r.speedup) t["speedup"] = *r.speedup;
        t["prompt_version"] = r.prompt_version;
        tasks.push_back(std::move(t));
    }
    doc["per_task"] = std::move(tasks);
    return doc.dump(2) + "\n";
}

std::vector<std::filesystem::path> emit_report(const AggregateReport& report,
                                               const std::set<ReportFormat>& formats,
                                               const std::filesystem::path& out_dir) {
    std::vector<std::filesystem::path> written;
    if (formats.empty()) {
        return written;
    }
    std::filesystem::create_directories(out_dir);
    if (formats.count(ReportFormat::table)) {
        const auto path = out_dir / "report.txt";
        util::write_file(path, render_table(report));
        written.push_back(path);
    }
    if (formats.count(ReportFormat::structured)) {
        const auto path = out_dir / "report.json";
        util::write_file(path, render_structured(report));
        written.push_back(path);
    }
    return written;
}

AggregateReport parse_report(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(util::read_file(path));
    } catch (const json::exception& ex) {
        throw ParseError("report " + path.string() + ": " + ex.what());
    }
    if (doc.value("schema", std::string()) != kSchemaTag) {
        throw ParseError("report " + path.string() + ": unknown schema tag");
    }
    AggregateReport report;
    report.n_tasks = doc.at("n_tasks").get<int>();
    report.config_digest = doc.value("config_digest", std::string());
    auto read_counts = [](const json& j) {
        PercentCounts pc;
        pc.percent = j.at("percent").get<double>();
        pc.count = j.at("count").get<int>();
        pc.total = j.at("total").get<int>();
        return pc;
    };
    report.acc = read_counts(doc.at("acc"));
    if (doc.contains("acc_perf")) {
        report.acc_perf = read_counts(doc.at("acc_perf"));
    }
    if (doc.contains("avg_debug_rounds_solved")) {
        report.avg_debug_rounds_solved = doc.at("avg_debug_rounds_solved").get<double>();
    }
    for (const auto& t : doc.at("per_task")) {
        EvalRecord rec;
        rec.task_id = t.at("task_id").get<std::string>();
        rec.correct = t.at("correct").get<bool>();
        rec.superior_perf = t.at("superior_perf").get<bool>();
        rec.debug_rounds_generation = t.at("debug_rounds_generation").get<int>();
        if (t.contains("speedup")) rec.speedup = t.at("speedup").get<double>();
        rec.prompt_version = t.value("prompt_version", std::string());
        report.per_task.push_back(std::move(rec));
    }
    return report;
}

}  // namespace irasm
