#include "irasm/pipeline.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "irasm/errors.hpp"
#include "irasm/prompts.hpp"
#include "irasm/util.hpp"

namespace irasm {

namespace {

using nlohmann::json;

json verdict_json(const Verdict& verdict) {
    json v;
    v["status"] = to_string(verdict.status);
    if (verdict.diagnostics) {
        v["stage"] = to_string(verdict.diagnostics->stage);
        v["excerpt"] = verdict.diagnostics->excerpt;
        if (verdict.diagnostics->exit_code) v["exit_code"] = *verdict.diagnostics->exit_code;
    }
    return v;
}

const char* to_string(AttemptKind kind) {
    switch (kind) {
        case AttemptKind::initial: return "initial";
        case AttemptKind::debug_fix: return "debug_fix";
        case AttemptKind::optimize: return "optimize";
    }
    return "initial";
}

std::chrono::nanoseconds series_median(const TimingSeries& series) {
    if (series.runs.size() == 11) {
        return median_protocol(series);
    }
    auto sorted = series.runs;
    std::sort(sorted.begin(), sorted.end());
    return sorted[sorted.size() / 2];
}

}  // namespace

std::string stage_label(const SelfDebugTrace& trace) {
    if (trace.stage == TraceStage::generation) return "generation";
    return "optimization_round_" + std::to_string(trace.optimization_round);
}

std::string serialize_outcome(const TaskOutcome& outcome) {
    json doc;
    doc["task_id"] = outcome.task_id;
    doc["correct"] = outcome.correct;
    doc["prompt_version"] = outcome.prompt_version;
    if (outcome.best_candidate) {
        json best;
        best["asm_sha256"] = util::sha256_hex(outcome.best_candidate->asm_text);
        if (outcome.best_candidate->median_runtime) {
            best["measured"] = true;
        }
        doc["best_candidate"] = std::move(best);
    }
    auto trace_json = [](const SelfDebugTrace& trace) {
        json t;
        t["task_id"] = trace.task_id;
        t["stage"] = stage_label(trace);
        t["rounds_used"] = trace.rounds_used;
        t["resolved"] = trace.resolved;
        json attempts = json::array();
        for (const auto& a : trace.attempts) {
            json aj;
            aj["index"] = a.index;
            aj["kind"] = to_string(a.kind);
            aj["request_digest"] = a.request_digest;
            if (a.asm_text) aj["asm_sha256"] = util::sha256_hex(*a.asm_text);
            aj["verdict"] = verdict_json(a.verdict);
            if (a.feedback_sent) aj["feedback_sha256"] = util::sha256_hex(*a.feedback_sent);
            attempts.push_back(std::move(aj));
        }
        t["attempts"] = std::move(attempts);
        return t;
    };
    doc["generation_trace"] = trace_json(outcome.generation_trace);
    json opts = json::array();
    for (const auto& t : outcome.optimization_traces) opts.push_back(trace_json(t));
    doc["optimization_traces"] = std::move(opts);
    if (outcome.perf) {
        doc["perf"] = {{"speedup", outcome.perf->speedup}};
    }
    return doc.dump(2) + "\n";
}

Verifier make_toolchain_verifier(const ToolchainConfig& toolchain, const ExecutionLimits& limits,
                                 RunResult reference_run, CheckerMode checker,
                                 std::vector<std::string> emulator_prefix) {
    return [toolchain, limits, reference_run = std::move(reference_run), checker,
            emulator_prefix = std::move(emulator_prefix)](
               const TaskSpec& task, const std::string& asm_text,
               const std::string& attempt_tag) -> VerifyOutcome {
        auto built = build_candidate(task, asm_text, toolchain, attempt_tag);
        if (std::holds_alternative<FailureDiagnostics>(built)) {
            auto diag = std::get<FailureDiagnostics>(built);
            const auto status = diag.stage == FailureStage::assemble ? VerdictStatus::AssembleFail
                                                                     : VerdictStatus::LinkFail;
            return {fail_verdict(status, std::move(diag)), std::nullopt};
        }
        BuildProduct product = std::get<BuildProduct>(built);
        RunResult result = run(product, limits, emulator_prefix);
        Verdict verdict = check_correctness(result, reference_run, checker);
        return {std::move(verdict), std::move(product)};
    };
}

TraceSink::TraceSink(const std::filesystem::path& path) : path_(path) {
    if (path_.has_parent_path()) {
        std::filesystem::create_directories(path_.parent_path());
    }
}

void TraceSink::record(const std::string& task_id, const std::string& stage,
                       const Attempt& attempt) {
    json line;
    line["task_id"] = task_id;
    line["stage"] = stage;
    line["attempt_index"] = attempt.index;
    line["kind"] = attempt.kind == AttemptKind::initial
                       ? "initial"
                       : (attempt.kind == AttemptKind::debug_fix ? "debug_fix" : "optimize");
    line["request_digest"] = attempt.request_digest;
    if (attempt.asm_text) line["asm_sha256"] = util::sha256_hex(*attempt.asm_text);
    line["verdict"] = verdict_json(attempt.verdict);
    line["ts_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::system_clock::now().time_since_epoch())
                        .count();
    std::lock_guard<std::mutex> lock(mutex_);
    std::ofstream out(path_, std::ios::app);
    out << line.dump() << "\n";
    out.flush();
}

ExtractedAsm try_extract(const std::string& response_content) {
    try {
        std::string asm_text = extract_assembly(response_content);
        if (util::trim(asm_text).empty()) {
            FailureDiagnostics diag;
            diag.stage = FailureStage::extract;
            diag.excerpt = "no assembly block found (the fenced block was empty)";
            return diag;
        }
        return asm_text;
    } catch (const NoAssemblyBlock&) {
        FailureDiagnostics diag;
        diag.stage = FailureStage::extract;
        diag.excerpt = "no assembly block found in the response";
        return diag;
    }
}

SelfDebugTrace self_debug_loop(const TaskSpec& task, std::vector<ChatMessage> conversation,
                               const std::string& conversation_id, ExtractedAsm first,
                               const std::string& first_digest, int max_rounds,
                               TraceStage stage, int optimization_round,
                               const LoopServices& services) {
    SelfDebugTrace trace;
    trace.task_id = task.id;
    trace.stage = stage;
    trace.optimization_round = optimization_round;

    ExtractedAsm current = std::move(first);
    std::string digest = first_digest;
    std::optional<std::string> feedback;
    int index = 0;

    for (;;) {
        Attempt attempt;
        attempt.index = index;
        attempt.kind = index == 0
                           ? (stage == TraceStage::generation ? AttemptKind::initial
                                                              : AttemptKind::optimize)
                           : AttemptKind::debug_fix;
        attempt.request_digest = digest;
        attempt.feedback_sent = feedback;

        FailureDiagnostics diag;
        if (std::holds_alternative<std::string>(current)) {
            const std::string& asm_text = std::get<std::string>(current);
            attempt.asm_text = asm_text;
            const std::string tag = stage_label(trace) + "-a" + std::to_string(index);
            VerifyOutcome outcome = services.verify(task, asm_text, tag);
            attempt.verdict = outcome.verdict;
            if (outcome.verdict.diagnostics) diag = *outcome.verdict.diagnostics;
        } else {
            diag = std::get<FailureDiagnostics>(current);
            attempt.verdict = fail_verdict(VerdictStatus::ExtractFail, diag);
        }

        trace.attempts.push_back(attempt);
        if (services.sink) {
            services.sink->record(task.id, stage_label(trace), attempt);
        }

        if (attempt.verdict.status == VerdictStatus::Pass) {
            trace.resolved = true;
            break;
        }
        if (trace.rounds_used >= max_rounds) {
            break;
        }

        // Ask for a fix.
        ChatMessage feedback_msg = make_debug_message(diag);
        std::vector<ChatMessage> next_messages;
        if (services.fresh_context_debug) {
            // Ablation mode: original request, latest listing, feedback only.
            next_messages.push_back(conversation.front());
            if (conversation.size() > 1) next_messages.push_back(conversation.back());
            next_messages.push_back(feedback_msg);
        } else {
            conversation.push_back(feedback_msg);
            next_messages = conversation;
        }

        ChatRequest request;
        request.model = services.model.model;
        request.temperature = services.model.temperature;
        request.max_tokens = services.model.max_tokens;
        request.messages = next_messages;
        request.conversation = conversation_id;
        digest = request_digest(request);

        ChatResponse response = services.gateway->complete(request);
        conversation.push_back(ChatMessage{ChatRole::assistant, response.content});
        current = try_extract(response.content);
        feedback = feedback_msg.content;
        ++trace.rounds_used;
        ++index;
    }
    return trace;
}

namespace {

struct EligibleCandidate {
    std::string asm_text;
    std::optional<std::chrono::nanoseconds> median;
    std::optional<BuildProduct> product;
};

std::optional<BuildProduct> last_product(const TaskSpec& task, const SelfDebugTrace& trace,
                                         const Verifier& verify) {
    if (!trace.resolved || trace.attempts.empty() || !trace.attempts.back().asm_text) {
        return std::nullopt;
    }
    VerifyOutcome outcome =
        verify(task, *trace.attempts.back().asm_text, stage_label(trace) + "-final");
    if (outcome.verdict.status != VerdictStatus::Pass) {
        return std::nullopt;
    }
    return outcome.product;
}

}  // namespace

TaskOutcome neural_compile(const TaskSpec& task, const std::string& prompt_text,
                           const std::string& prompt_version_id, const PipelineConfig& config,
                           const PipelineDeps& deps) {
    TaskOutcome outcome;
    outcome.task_id = task.id;
    outcome.prompt_version = prompt_version_id;

    // References. The -O0 run is the differential oracle for every verdict.
    Verifier verify;
    std::optional<BuildProduct> ref_o3;
    std::vector<std::string> emulator;
    if (deps.verifier_override) {
        verify = *deps.verifier_override;
    } else {
        if (deps.arch.execution_mode == ExecutionMode::emulated) {
            emulator = deps.toolchain.emulator_prefix;
        }
        BuildProduct ref_o0 = build_reference(task, deps.toolchain.opt_level_reference,
                                              deps.toolchain);
        if (!ref_o0.success) {
            throw ReferenceBuildFailure("reference -O0 build failed for task '" + task.id +
                                        "':\n" + ref_o0.build_log);
        }
        RunResult ref_run = run(ref_o0, config.limits, emulator);
        if (ref_run.timed_out || ref_run.crashed) {
            throw OracleInvalid("reference run misbehaved for task '" + task.id + "'");
        }
        if (config.measure_perf) {
            BuildProduct o3 = build_reference(task, deps.toolchain.opt_level_optimized,
                                              deps.toolchain);
            if (!o3.success) {
                throw ReferenceBuildFailure("reference -O3 build failed for task '" + task.id +
                                            "':\n" + o3.build_log);
            }
            ref_o3 = std::move(o3);
        }
        verify = make_toolchain_verifier(deps.toolchain, config.limits, std::move(ref_run),
                                         task.checker, emulator);
    }

    auto measure_series = [&](const BuildProduct& product, int n) -> TimingSeries {
        if (deps.measure_override) {
            return deps.measure_override(product, n);
        }
        ExclusiveTimingLock lock(config.lock_file);
        return measure(product, config.limits, n, emulator);
    };

    LoopServices services;
    services.gateway = deps.gateway;
    services.model = deps.model;
    services.verify = verify;
    services.sink = deps.sink;
    services.fresh_context_debug = config.fresh_context_debug;

    // Stage 1: initial generation.
    const std::string gen_conversation = deps.conversation_prefix + task.id + ":gen";
    std::vector<ChatMessage> messages =
        render_generation_prompt(prompt_text, task.ir_text, deps.arch);
    ChatRequest request;
    request.model = deps.model.model;
    request.temperature = deps.model.temperature;
    request.max_tokens = deps.model.max_tokens;
    request.messages = messages;
    request.conversation = gen_conversation;
    const std::string first_digest = request_digest(request);

    ChatResponse response = deps.gateway->complete(request);
    messages.push_back(ChatMessage{ChatRole::assistant, response.content});

    outcome.generation_trace =
        self_debug_loop(task, messages, gen_conversation, try_extract(response.content),
                        first_digest, config.max_debug_rounds_generation, TraceStage::generation,
                        0, services);

    outcome.correct = outcome.generation_trace.resolved;
    if (!outcome.correct) {
        // Early termination: a failed generation is never optimized.
        return outcome;
    }

    const std::string initial_asm = *outcome.generation_trace.attempts.back().asm_text;

    const bool measuring = config.measure_each_round && config.optimization_rounds > 0;
    std::vector<EligibleCandidate> eligible;
    eligible.push_back({initial_asm, std::nullopt, std::nullopt});

    if (measuring || config.measure_perf) {
        if (auto product = last_product(task, outcome.generation_trace, verify)) {
            eligible.back().product = product;
        }
    }
    if (measuring && eligible.back().product) {
        eligible.back().median =
            series_median(measure_series(*eligible.back().product, config.screen_runs));
    }

    auto best_index = [&]() -> std::size_t {
        std::size_t best = 0;
        for (std::size_t i = 1; i < eligible.size(); ++i) {
            if (eligible[i].median && (!eligible[best].median ||
                                       *eligible[i].median < *eligible[best].median)) {
                best = i;
            }
        }
        return best;
    };

    // Stage 2: iterative optimization over the current best correct listing.
    for (int round = 1; round <= config.optimization_rounds; ++round) {
        const std::string& base_asm = eligible[best_index()].asm_text;
        const std::string conv_id =
            deps.conversation_prefix + task.id + ":opt" + std::to_string(round);
        std::vector<ChatMessage> opt_messages =
            render_optimization_prompt(prompt_text, task, deps.arch, base_asm);

        ChatRequest opt_request;
        opt_request.model = deps.model.model;
        opt_request.temperature = deps.model.temperature;
        opt_request.max_tokens = deps.model.max_tokens;
        opt_request.messages = opt_messages;
        opt_request.conversation = conv_id;
        const std::string opt_digest = request_digest(opt_request);

        ChatResponse opt_response = deps.gateway->complete(opt_request);
        opt_messages.push_back(ChatMessage{ChatRole::assistant, opt_response.content});

        SelfDebugTrace trace = self_debug_loop(
            task, opt_messages, conv_id, try_extract(opt_response.content), opt_digest,
            config.max_debug_rounds_optimization, TraceStage::optimization, round, services);
        outcome.optimization_traces.push_back(trace);

        if (!trace.resolved) {
            continue;  // discard; the next round starts from the previous best
        }
        EligibleCandidate cand;
        cand.asm_text = *trace.attempts.back().asm_text;
        if (measuring || config.measure_perf) {
            cand.product = last_product(task, trace, verify);
        }
        if (measuring && cand.product) {
            cand.median = series_median(measure_series(*cand.product, config.screen_runs));
        }
        eligible.push_back(std::move(cand));
    }

    EligibleCandidate& best = eligible[best_index()];
    outcome.best_candidate = BestCandidate{best.asm_text, best.median};

    if (config.measure_perf && ref_o3) {
        if (!best.product) {
            if (auto product = last_product(task, outcome.generation_trace, verify)) {
                best.product = product;
            }
        }
        if (best.product) {
            TimingSeries cand_series, o3_series;
            if (deps.measure_override) {
                cand_series = deps.measure_override(*best.product, config.perf_runs);
                o3_series = deps.measure_override(*ref_o3, config.perf_runs);
            } else {
                ExclusiveTimingLock lock(config.lock_file);
                std::tie(cand_series, o3_series) = measure_interleaved(
                    *best.product, *ref_o3, config.limits, config.perf_runs, emulator);
            }
            const auto cand_median = series_median(cand_series);
            const auto o3_median = series_median(o3_series);
            outcome.perf = compare_perf(o3_median, cand_median);
            outcome.best_candidate->median_runtime = cand_median;
        }
    }
    return outcome;
}

}  // namespace irasm
