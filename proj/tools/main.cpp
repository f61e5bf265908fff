// irasm: LLM-driven LLVM IR to assembly compilation harness.
//
// Subcommands: ingest, compile, eval, learn, bench, report.
// Exit codes: 0 success, 1 task-level failure, 2 operational error.

#include <atomic>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "irasm/config.hpp"
#include "irasm/errors.hpp"
#include "irasm/evolve.hpp"
#include "irasm/gateway.hpp"
#include "irasm/perf.hpp"
#include "irasm/pipeline.hpp"
#include "irasm/prompts.hpp"
#include "irasm/report.hpp"
#include "irasm/task.hpp"
#include "irasm/util.hpp"

namespace {

using namespace irasm;

struct PromptRef {
    std::string version_id;
    std::string text;
};

PromptRef resolve_prompt(const ExperimentConfig& cfg) {
    if (cfg.prompt.store_dir) {
        PromptStore store = PromptStore::load(*cfg.prompt.store_dir);
        if (cfg.prompt.version.empty()) {
            throw ConfigError("prompt.store_dir requires prompt.version");
        }
        const PromptVersion& v = store.at(cfg.prompt.version);
        return {v.version_id, v.text};
    }
    if (!cfg.prompt.file) {
        throw ConfigError("config names no prompt source");
    }
    std::string text = util::read_file(*cfg.prompt.file);
    return {util::sha256_hex(text), text};
}

void prepare_output(const ExperimentConfig& cfg) {
    if (cfg.clean) {
        std::error_code ec;
        std::filesystem::remove_all(cfg.output_dir / "work", ec);
    }
    std::filesystem::create_directories(cfg.output_dir);
    util::write_file(cfg.output_dir / "effective_config.json", effective_config_json(cfg));
}

SplitAssignment resolve_split(const ExperimentConfig& cfg, const DatasetManifest& manifest) {
    if (cfg.split.file) {
        return load_split_file(*cfg.split.file);
    }
    if (cfg.split.counts) {
        return split_dataset(manifest, *cfg.split.counts, cfg.split.seed);
    }
    // No split spec: everything is test data.
    SplitAssignment split;
    for (const auto& task : manifest.tasks) split.test.push_back(task.id);
    return split;
}

const std::vector<std::string>& split_ids(const SplitAssignment& split, const std::string& name,
                                          std::vector<std::string>& all_storage,
                                          const DatasetManifest& manifest) {
    if (name == "train") return split.train;
    if (name == "validation") return split.validation;
    if (name == "test") return split.test;
    if (name == "all") {
        for (const auto& task : manifest.tasks) all_storage.push_back(task.id);
        return all_storage;
    }
    throw ConfigError("unknown split '" + name + "' (train|validation|test|all)");
}

PipelineDeps make_deps(const ExperimentConfig& cfg, Gateway& gateway, TraceSink* sink,
                       const std::string& conversation_prefix = {}) {
    PipelineDeps deps;
    deps.gateway = &gateway;
    deps.model = cfg.model;
    deps.toolchain = cfg.toolchain;
    deps.arch = cfg.arch;
    deps.sink = sink;
    deps.conversation_prefix = conversation_prefix;
    return deps;
}

void print_outcome(const TaskOutcome& outcome) {
    if (outcome.correct) {
        std::cout << "task " << outcome.task_id << ": resolved rounds="
                  << outcome.generation_trace.rounds_used << "\n";
    } else {
        const auto& attempts = outcome.generation_trace.attempts;
        std::cout << "task " << outcome.task_id << ": failed after "
                  << outcome.generation_trace.rounds_used << " debug round(s)";
        if (!attempts.empty()) {
            std::cout << " (last verdict: " << to_string(attempts.back().verdict.status) << ")";
        }
        std::cout << "\n";
        if (!attempts.empty() && attempts.back().verdict.diagnostics) {
            std::cout << attempts.back().verdict.diagnostics->excerpt << "\n";
        }
    }
    if (outcome.perf) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.4f", outcome.perf->speedup);
        std::cout << "speedup vs -O3: " << buf << "\n";
    }
}

int cmd_ingest(const ExperimentConfig& cfg) {
    prepare_output(cfg);
    DatasetManifest manifest = load_manifest(cfg.manifest_path);
    int l1 = 0, l2 = 0;
    for (const auto& task : manifest.tasks) (task.level == TaskLevel::L1 ? l1 : l2)++;
    std::cout << "manifest: " << manifest.dataset_name << "\n"
              << "arch:     " << to_string(manifest.arch.name) << "\n"
              << "tasks:    " << manifest.tasks.size() << " (L1: " << l1 << ", L2: " << l2
              << ")\n";
    SplitAssignment split = resolve_split(cfg, manifest);
    save_split_file(split, cfg.output_dir / "splits.json");
    std::cout << "split:    train=" << split.train.size()
              << " validation=" << split.validation.size() << " test=" << split.test.size()
              << " -> " << (cfg.output_dir / "splits.json").string() << "\n";
    return 0;
}

int cmd_compile(const ExperimentConfig& cfg, const std::string& task_id) {
    prepare_output(cfg);
    DatasetManifest manifest = load_manifest(cfg.manifest_path);
    const TaskSpec* task = find_task(manifest, task_id);
    if (task == nullptr) {
        throw ConfigError("task '" + task_id + "' not in manifest");
    }
    PromptRef prompt = resolve_prompt(cfg);
    Gateway gateway(cfg.provider);
    TraceSink sink(cfg.output_dir / "trajectory.jsonl");
    PipelineDeps deps = make_deps(cfg, gateway, &sink);
    PipelineConfig pipeline = pipeline_config_for(cfg, *task);

    TaskOutcome outcome = neural_compile(*task, prompt.text, prompt.version_id, pipeline, deps);
    util::write_file(cfg.output_dir / "outcomes" / (task->id + ".json"),
                     serialize_outcome(outcome));
    print_outcome(outcome);
    return outcome.correct ? 0 : 1;
}

int cmd_eval(const ExperimentConfig& cfg, const std::string& split_name) {
    prepare_output(cfg);
    DatasetManifest manifest = load_manifest(cfg.manifest_path);
    SplitAssignment split = resolve_split(cfg, manifest);
    std::vector<std::string> all_storage;
    const std::vector<std::string>& ids = split_ids(split, split_name, all_storage, manifest);
    if (ids.empty()) {
        throw ConfigError("split '" + split_name + "' is empty");
    }

    PromptRef prompt = resolve_prompt(cfg);
    Gateway gateway(cfg.provider);
    TraceSink sink(cfg.output_dir / "trajectory.jsonl");

    struct Slot {
        std::optional<TaskOutcome> outcome;
        std::string excluded_reason;
    };
    std::vector<Slot> slots(ids.size());
    std::atomic<std::size_t> next{0};
    std::mutex io_mutex;

    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= ids.size()) break;
            const TaskSpec* task = find_task(manifest, ids[i]);
            if (task == nullptr) {
                slots[i].excluded_reason = "not in manifest";
                continue;
            }
            try {
                PipelineDeps deps = make_deps(cfg, gateway, &sink);
                PipelineConfig pipeline = pipeline_config_for(cfg, *task);
                TaskOutcome outcome =
                    neural_compile(*task, prompt.text, prompt.version_id, pipeline, deps);
                {
                    std::lock_guard<std::mutex> lock(io_mutex);
                    util::write_file(cfg.output_dir / "outcomes" / (task->id + ".json"),
                                     serialize_outcome(outcome));
                }
                slots[i].outcome = std::move(outcome);
            } catch (const ReferenceBuildFailure& ex) {
                slots[i].excluded_reason = ex.what();
            } catch (const OracleInvalid& ex) {
                slots[i].excluded_reason = ex.what();
            }
        }
    };

    const int jobs = std::min<int>(cfg.jobs, static_cast<int>(ids.size()));
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::vector<EvalRecord> records;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!slots[i].outcome) {
            std::cerr << "excluded " << ids[i] << ": " << slots[i].excluded_reason << "\n";
            continue;
        }
        const TaskOutcome& outcome = *slots[i].outcome;
        const bool superior = outcome.perf && outcome.perf->speedup > 1.0;
        std::optional<double> speedup;
        if (outcome.perf) speedup = outcome.perf->speedup;
        records.push_back(make_eval_record(outcome.task_id, outcome.correct, superior,
                                           outcome.generation_trace.rounds_used, speedup,
                                           outcome.prompt_version));
    }
    if (records.empty()) {
        throw ValidationError("no tasks were evaluated (all excluded)");
    }

    bool perf_measured = false;
    for (const auto& r : records) perf_measured = perf_measured || r.speedup.has_value();
    AggregateReport report = aggregate(records, perf_measured, cfg.digest);
    emit_report(report, {ReportFormat::table, ReportFormat::structured}, cfg.output_dir);
    std::cout << render_table(report);
    return 0;
}

// Production wiring for the offline prompt-learning loop.
int cmd_learn(const ExperimentConfig& cfg, bool resume) {
    prepare_output(cfg);
    DatasetManifest manifest = load_manifest(cfg.manifest_path);
    SplitAssignment split = resolve_split(cfg, manifest);
    if (split.train.empty() || split.validation.empty()) {
        throw ConfigError("learn requires non-empty train and validation splits");
    }
    if (cfg.meta_propose_path.empty() || cfg.meta_confirm_path.empty()) {
        throw ConfigError("learn requires meta_propose and meta_confirm templates");
    }
    MetaTemplates templates{util::read_file(cfg.meta_propose_path),
                            util::read_file(cfg.meta_confirm_path)};

    Gateway gateway(cfg.provider);
    TraceSink sink(cfg.output_dir / "trajectory.jsonl");

    const auto checkpoint_path = cfg.learn_store_dir / "checkpoint.json";
    PromptStore store = [&]() {
        if (resume && std::filesystem::exists(cfg.learn_store_dir / "lineage.json")) {
            return PromptStore::load(cfg.learn_store_dir);
        }
        PromptRef baseline = resolve_prompt(cfg);
        return PromptStore::init(baseline.text);
    }();
    int resume_epoch = 0, resume_batch = 0;
    std::string resume_current;
    if (resume && std::filesystem::exists(checkpoint_path)) {
        auto doc = nlohmann::json::parse(util::read_file(checkpoint_path));
        resume_epoch = doc.value("epoch", 0);
        resume_batch = doc.value("batch", 0);
        resume_current = doc.value("current", std::string());
    }

    auto compile_one = [&](const std::string& task_id, const PromptVersion& prompt,
                           const std::string& prefix) -> TaskOutcome {
        const TaskSpec* task = find_task(manifest, task_id);
        if (task == nullptr) {
            throw ConfigError("split names unknown task '" + task_id + "'");
        }
        PipelineDeps deps = make_deps(cfg, gateway, &sink, prefix);
        PipelineConfig pipeline = pipeline_config_for(cfg, *task);
        // Offline learning runs generation + self-debug only.
        pipeline.optimization_rounds = 0;
        pipeline.measure_perf = false;
        pipeline.measure_each_round = false;
        try {
            return neural_compile(*task, prompt.text, prompt.version_id, pipeline, deps);
        } catch (const ReferenceBuildFailure&) {
            TaskOutcome failed;
            failed.task_id = task_id;
            failed.prompt_version = prompt.version_id;
            return failed;
        } catch (const OracleInvalid&) {
            TaskOutcome failed;
            failed.task_id = task_id;
            failed.prompt_version = prompt.version_id;
            return failed;
        }
    };

    LearnDeps deps;
    deps.compile = [&](const std::string& task_id, const PromptVersion& prompt, int epoch,
                       int batch) {
        return compile_one(task_id, prompt,
                           "e" + std::to_string(epoch) + "b" + std::to_string(batch) + ":");
    };
    deps.validate = [&](const std::vector<std::string>& task_ids, const PromptVersion& prompt,
                        int epoch) {
        int solved = 0;
        for (const auto& id : task_ids) {
            TaskOutcome outcome =
                compile_one(id, prompt, "val:e" + std::to_string(epoch) + ":");
            solved += outcome.correct ? 1 : 0;
        }
        return static_cast<double>(solved) / static_cast<double>(task_ids.size());
    };
    deps.propose = [&](const PromptVersion& current, const LearningBatchSignal& signal, int epoch,
                       int batch) {
        std::vector<std::string> warnings;
        auto proposals = propose_edits(
            current, signal, gateway, cfg.model, templates,
            "meta:propose:e" + std::to_string(epoch) + "b" + std::to_string(batch), &warnings);
        for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
        return proposals;
    };
    deps.confirm = [&](const PromptVersion& current, const std::vector<EditProposal>& proposals,
                       int epoch, int batch) {
        return confirm_edits(current, proposals, gateway, cfg.model, templates,
                             "meta:confirm:e" + std::to_string(epoch) + "b" +
                                 std::to_string(batch));
    };
    deps.warn = [](const std::string& msg) { std::cerr << "warning: " << msg << "\n"; };
    deps.checkpoint = [&](int epoch, int batch, const std::string& current) {
        store.save(cfg.learn_store_dir);
        nlohmann::json ck;
        ck["epoch"] = epoch;
        ck["batch"] = batch;
        ck["current"] = current;
        util::write_file_atomic(checkpoint_path, ck.dump(2) + "\n");
    };

    LearnResult result = learn(store, split.train, split.validation, cfg.learn, deps,
                               resume_epoch, resume_batch, resume_current);
    store.save(cfg.learn_store_dir);
    store.verify_lineage();

    const PromptVersion& selected = store.at(result.selected_id);
    util::write_file(cfg.output_dir / "selected_prompt.txt", selected.text);
    std::cout << "versions:  " << store.versions().size() << "\n";
    for (const auto& v : store.versions()) {
        std::cout << "  " << v.version_id.substr(0, 12)
                  << (v.parent_id ? "" : " (root)");
        if (v.validation_score) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.4f", *v.validation_score);
            std::cout << " score=" << buf;
        }
        std::cout << "\n";
    }
    std::cout << "selected:  " << result.selected_id << "\n"
              << "exported:  " << (cfg.output_dir / "selected_prompt.txt").string() << "\n";
    return 0;
}

int cmd_bench(const ExperimentConfig& cfg, const std::string& task_id,
              const std::filesystem::path& asm_file) {
    prepare_output(cfg);
    DatasetManifest manifest = load_manifest(cfg.manifest_path);
    const TaskSpec* task = find_task(manifest, task_id);
    if (task == nullptr) {
        throw ConfigError("task '" + task_id + "' not in manifest");
    }
    const std::string asm_text = util::read_file(asm_file);

    ExecutionLimits limits;
    limits.wall_timeout = task->timeout;
    limits.max_output_bytes = cfg.max_output_bytes;
    std::vector<std::string> emulator;
    if (cfg.arch.execution_mode == ExecutionMode::emulated) {
        emulator = cfg.toolchain.emulator_prefix;
    }

    BuildProduct ref_o0 = build_reference(*task, cfg.toolchain.opt_level_reference, cfg.toolchain);
    if (!ref_o0.success) {
        throw ReferenceBuildFailure("reference -O0 build failed:\n" + ref_o0.build_log);
    }
    RunResult ref_run = run(ref_o0, limits, emulator);

    // Refuse to time incorrect code: re-verify before any measurement.
    Verifier verify =
        make_toolchain_verifier(cfg.toolchain, limits, ref_run, task->checker, emulator);
    VerifyOutcome verified = verify(*task, asm_text, "bench");
    if (verified.verdict.status != VerdictStatus::Pass) {
        std::cout << "verdict: " << to_string(verified.verdict.status) << "\n";
        if (verified.verdict.diagnostics) {
            std::cout << verified.verdict.diagnostics->excerpt << "\n";
        }
        std::cout << "refusing to time incorrect code\n";
        return 1;
    }

    BuildProduct ref_o3 = build_reference(*task, cfg.toolchain.opt_level_optimized, cfg.toolchain);
    if (!ref_o3.success) {
        throw ReferenceBuildFailure("reference -O3 build failed:\n" + ref_o3.build_log);
    }

    TimingSeries cand_series, o3_series;
    {
        ExclusiveTimingLock lock(cfg.lock_file);
        std::tie(cand_series, o3_series) =
            measure_interleaved(*verified.product, ref_o3, limits, cfg.perf_runs, emulator);
    }
    const auto bench_dir = cfg.output_dir / "bench";
    write_timing_record(cand_series, bench_dir / (task->id + "-candidate.timing"));
    write_timing_record(o3_series, bench_dir / (task->id + "-O3.timing"));

    PerfComparison cmp =
        compare_perf(median_protocol(o3_series), median_protocol(cand_series));
    char buf[128];
    std::snprintf(buf, sizeof buf, "speedup: %.4f (llm median %.3f ms, O3 median %.3f ms)",
                  cmp.speedup, cmp.runtime_llm.count() / 1e6, cmp.runtime_o3.count() / 1e6);
    std::cout << buf << "\n";
    return 0;
}

int cmd_report(const std::filesystem::path& input, const std::optional<std::filesystem::path>& out) {
    AggregateReport report = parse_report(input);
    std::cout << render_table(report);
    if (out) {
        emit_report(report, {ReportFormat::table, ReportFormat::structured}, *out);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LLM-driven LLVM IR -> assembly compilation harness"};
    app.require_subcommand(1);

    std::string config_path;
    ConfigOverrides overrides;
    std::string arch_flag, prompt_flag, out_flag;
    int jobs_flag = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "experiment config file")->required();
        cmd->add_option("--arch", arch_flag, "override target architecture (x86_64|aarch64)");
        cmd->add_option("--prompt", prompt_flag, "override prompt file");
        cmd->add_option("--out", out_flag, "override the output directory");
        cmd->add_option("--jobs", jobs_flag, "concurrent task compilations");
        cmd->add_flag("--clean", overrides.clean, "purge the work directory first");
    };

    auto* ingest = app.add_subcommand("ingest", "validate a manifest and write splits");
    add_common(ingest);

    auto* compile = app.add_subcommand("compile", "neural-compile one task");
    add_common(compile);
    std::string task_id;
    compile->add_option("--task", task_id, "task id")->required();

    auto* eval = app.add_subcommand("eval", "run the workflow over a split and report");
    add_common(eval);
    std::string split_name = "test";
    eval->add_option("--split", split_name, "train|validation|test|all");

    auto* learn = app.add_subcommand("learn", "offline prompt learning");
    add_common(learn);
    bool resume = false;
    learn->add_flag("--resume", resume, "resume from the checkpoint");

    auto* bench = app.add_subcommand("bench", "verify then time a listing against -O3");
    add_common(bench);
    std::string bench_task;
    std::string bench_asm;
    bench->add_option("--task", bench_task, "task id")->required();
    bench->add_option("--asm", bench_asm, "assembly file to time")->required();

    auto* report = app.add_subcommand("report", "render a structured report");
    std::string report_input;
    std::string report_out;
    report->add_option("--input", report_input, "report.json path")->required();
    report->add_option("--out", report_out, "re-emit report files into this directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (report->parsed()) {
            std::optional<std::filesystem::path> out;
            if (!report_out.empty()) out = report_out;
            return cmd_report(report_input, out);
        }

        if (!arch_flag.empty()) overrides.arch = arch_flag;
        if (!prompt_flag.empty()) overrides.prompt_file = prompt_flag;
        if (!out_flag.empty()) overrides.output_dir = out_flag;
        if (jobs_flag > 0) overrides.jobs = jobs_flag;
        ExperimentConfig cfg = load_experiment_config(config_path, overrides);

        if (ingest->parsed()) return cmd_ingest(cfg);
        if (compile->parsed()) return cmd_compile(cfg, task_id);
        if (eval->parsed()) return cmd_eval(cfg, split_name);
        if (learn->parsed()) return cmd_learn(cfg, resume);
        if (bench->parsed()) return cmd_bench(cfg, bench_task, bench_asm);
    } catch (const Error& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    }
    return 2;
}
