// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria 5, 6 and 10 drive the CLI binary end to end; the rest
// exercise the library directly.

#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>

#include "irasm/config.hpp"
#include "irasm/errors.hpp"
#include "irasm/evolve.hpp"
#include "irasm/gateway.hpp"
#include "irasm/perf.hpp"
#include "irasm/pipeline.hpp"
#include "irasm/report.hpp"
#include "irasm/subprocess.hpp"
#include "irasm/util.hpp"
#include "support.hpp"

using namespace irasm;
using std::chrono::milliseconds;
using std::chrono::nanoseconds;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::vector<std::string>& args) {
    SpawnSpec spec;
    spec.argv.push_back(IRASM_CLI_PATH);
    for (const auto& a : args) spec.argv.push_back(a);
    spec.timeout = std::chrono::milliseconds(180000);
    ProcessResult res = run_process(spec);
    return {res.exit_code, res.stdout_data, res.stderr_data};
}

std::string cfg(const std::string& name) {
    return (testsupport::fixtures_dir() / "configs" / name).string();
}

#define REQUIRE_OR_FAIL(cond, message)                         \
    do {                                                       \
        if (!(cond)) {                                         \
            detail = (message);                                \
            return false;                                      \
        }                                                      \
    } while (0)

// ---- criterion 1 ----------------------------------------------------------

bool metric_formatting(std::string& detail) {
    auto rec = [](int correct, int total) {
        std::vector<EvalRecord> records;
        for (int i = 0; i < total; ++i) {
            records.push_back(make_eval_record("t" + std::to_string(i), i < correct, false, 0,
                                               std::nullopt, "v"));
        }
        return records;
    };
    std::string a = format_percent_counts(compute_acc(rec(69, 151)));
    REQUIRE_OR_FAIL(a == "45.70 (69/151)", "got '" + a + "' for 69/151");
    std::string b = format_percent_counts(compute_acc(rec(16, 25)));
    REQUIRE_OR_FAIL(b == "64.00 (16/25)", "got '" + b + "' for 16/25");

    std::vector<EvalRecord> perf_records;
    for (int i = 0; i < 25; ++i) {
        const bool superior = i < 14;
        perf_records.push_back(make_eval_record("t" + std::to_string(i), true, superior, 0,
                                                superior ? std::optional<double>(1.5)
                                                         : std::optional<double>(0.9),
                                                "v"));
    }
    std::string c = format_percent_counts(compute_acc_perf(perf_records));
    REQUIRE_OR_FAIL(c == "56.00 (14/25)", "got '" + c + "' for 14/25");
    return true;
}

// ---- criterion 2 ----------------------------------------------------------

bool speedup_fidelity(std::string& detail) {
    for (double r : {0.001, 0.5, 1.0, 2.75, 1000.0}) {
        const double s331 = speedup(nanoseconds(llround(r * 3.2485 * 1e9)),
                                    nanoseconds(llround(r * 1e9)));
        REQUIRE_OR_FAIL(std::abs(s331 - 3.2485) <= 1e-9,
                        "s331 ratio off at r=" + std::to_string(r));
        const double s452 = speedup(nanoseconds(llround(r * 0.8621 * 1e9)),
                                    nanoseconds(llround(r * 1e9)));
        REQUIRE_OR_FAIL(std::abs(s452 - 0.8621) <= 1e-9,
                        "s452 ratio off at r=" + std::to_string(r));
    }
    const std::vector<double> published = {3.2485, 2.0621, 1.9954, 1.1048, 1.0852, 1.0543,
                                           1.0288, 1.0278, 1.0277, 1.0275, 1.0274, 1.0253,
                                           1.0247, 1.0224, 0.8621, 0.7924};
    const double mean =
        std::accumulate(published.begin(), published.end(), 0.0) / published.size();
    REQUIRE_OR_FAIL(std::abs(mean - 1.28) <= 0.005,
                    "mean of the 16 published speedups is " + std::to_string(mean));
    return true;
}

// ---- criterion 3 ----------------------------------------------------------

bool timing_protocol(std::string& detail) {
    auto series_of = [](const std::vector<long>& ms) {
        TimingSeries s;
        s.n_total = static_cast<int>(ms.size());
        for (long v : ms) s.runs.push_back(std::chrono::duration_cast<nanoseconds>(milliseconds(v)));
        return s;
    };
    REQUIRE_OR_FAIL(median_protocol(series_of({9, 9, 9, 1, 2, 3, 4, 5, 9, 9, 9})) ==
                        milliseconds(3),
                    "kept-window median incorrect");
    bool guarded = false;
    try {
        median_protocol(series_of({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}));
    } catch (const ProtocolError&) {
        guarded = true;
    }
    REQUIRE_OR_FAIL(guarded, "10-run series not rejected");

    util::SplitMix64 rng(8080);
    for (int iter = 0; iter < 1000; ++iter) {
        std::vector<long> ms(11);
        for (auto& v : ms) v = 1 + static_cast<long>(rng.next() % 10000);
        const auto base = median_protocol(series_of(ms));

        // Exhaustive-ish check: random permutations of the two discarded
        // windows must not change the result, and the kept window fully
        // determines it.
        std::vector<long> permuted = ms;
        for (int i = 2; i > 0; --i) {
            std::swap(permuted[i], permuted[rng.next() % (i + 1)]);
        }
        for (int i = 10; i > 8; --i) {
            std::swap(permuted[i], permuted[8 + rng.next() % (i - 8 + 1)]);
        }
        REQUIRE_OR_FAIL(median_protocol(series_of(permuted)) == base,
                        "median changed under discard-window permutation");

        std::vector<long> kept(ms.begin() + 3, ms.begin() + 8);
        std::sort(kept.begin(), kept.end());
        REQUIRE_OR_FAIL(base == milliseconds(kept[2]), "median is not the kept-window middle");
    }
    return true;
}

// ---- criterion 4 ----------------------------------------------------------

bool self_debug_budget_law(std::string& detail) {
    util::SplitMix64 rng(31337);
    for (int iter = 0; iter < 500; ++iter) {
        const int max_rounds = static_cast<int>(rng.next() % 5);
        const bool first_good = rng.next() % 4 == 0;
        std::vector<std::string> fixes;
        std::vector<bool> fix_good;
        for (int i = 0; i < max_rounds; ++i) {
            const bool good = rng.next() % 3 == 0;
            fix_good.push_back(good);
            fixes.push_back(testsupport::fenced(good ? "CORRECT fix" : "bad fix"));
        }
        Gateway gateway = testsupport::make_scripted_gateway({{"t1:gen", fixes}});

        LoopServices services;
        services.gateway = &gateway;
        services.verify = testsupport::marker_verifier();
        TaskSpec task = testsupport::tiny_task();
        std::vector<ChatMessage> conversation = {
            ChatMessage{ChatRole::user, "translate"},
            ChatMessage{ChatRole::assistant, "reply"},
        };
        SelfDebugTrace trace = self_debug_loop(
            task, conversation, "t1:gen",
            std::string(first_good ? "CORRECT v0" : "bad v0"), "d0", max_rounds,
            TraceStage::generation, 0, services);

        REQUIRE_OR_FAIL(trace.rounds_used <= max_rounds, "budget exceeded");
        bool expect_resolved = first_good;
        for (int i = 0; i < max_rounds && !expect_resolved; ++i) {
            if (fix_good[static_cast<std::size_t>(i)]) expect_resolved = true;
        }
        REQUIRE_OR_FAIL(trace.resolved == expect_resolved,
                        "resolved flag disagrees with the script");
    }
    return true;
}

// ---- criterion 5 ----------------------------------------------------------

bool pipeline_determinism(std::string& detail) {
    const auto out_dir = testsupport::fresh_scratch("acc-eval4");
    std::string first_bytes;
    for (int round = 1; round <= 3; ++round) {
        CliResult res = run_cli({"eval", "--config", cfg("eval4_replay.json"), "--split", "all",
                                 "--out", out_dir.string()});
        REQUIRE_OR_FAIL(res.exit_code == 0,
                        "eval exit " + std::to_string(res.exit_code) + ": " + res.err);
        REQUIRE_OR_FAIL(res.out.find("75.00 (3/4)") != std::string::npos,
                        "ACC line missing, got:\n" + res.out);
        std::string bytes = util::read_file(out_dir / "report.json");
        if (round == 1) {
            first_bytes = bytes;
        } else {
            REQUIRE_OR_FAIL(bytes == first_bytes,
                            "report.json differs on repeat run " + std::to_string(round));
        }
    }
    return true;
}

// ---- criterion 6 ----------------------------------------------------------

bool toolchain_smoke(std::string& detail) {
    const auto out_dir = testsupport::fresh_scratch("acc-smoke");
    CliResult res = run_cli({"eval", "--config", cfg("smoke2.json"), "--split", "all", "--out",
                             out_dir.string()});
    REQUIRE_OR_FAIL(res.exit_code == 0, "smoke eval exit " + std::to_string(res.exit_code) +
                                            ": " + res.err);
    REQUIRE_OR_FAIL(res.out.find("100.00 (2/2)") != std::string::npos,
                    "expected ACC 100.00 (2/2), got:\n" + res.out);

    const auto corrupt_dir = testsupport::fresh_scratch("acc-smoke-corrupt");
    CliResult bad = run_cli({"compile", "--config", cfg("smoke2_corrupt.json"), "--task", "saxpy",
                             "--out", corrupt_dir.string()});
    REQUIRE_OR_FAIL(bad.exit_code == 1, "corrupted listing should exit 1, got " +
                                            std::to_string(bad.exit_code));
    REQUIRE_OR_FAIL(bad.out.find("WrongOutput") != std::string::npos,
                    "verdict missing from output:\n" + bad.out);
    REQUIRE_OR_FAIL(bad.out.find("expected (reference):") != std::string::npos &&
                        bad.out.find("actual   (candidate):") != std::string::npos,
                    "divergent line pair missing:\n" + bad.out);
    return true;
}

// ---- criterion 7 ----------------------------------------------------------

bool evolution_lineage(std::string& detail) {
    const auto out_dir = testsupport::fresh_scratch("acc-learn");
    CliResult res = run_cli({"learn", "--config", cfg("learn_micro.json"), "--out",
                             out_dir.string()});
    REQUIRE_OR_FAIL(res.exit_code == 0,
                    "learn exit " + std::to_string(res.exit_code) + ": " + res.err);

    PromptStore store = PromptStore::load(out_dir / "prompt-store");
    REQUIRE_OR_FAIL(store.versions().size() >= 3,
                    "expected >= 3 versions, got " + std::to_string(store.versions().size()));
    try {
        store.verify_lineage();  // replays every changelog from the root
    } catch (const Error& ex) {
        detail = std::string("lineage replay mismatch: ") + ex.what();
        return false;
    }
    // Explicit replay from the root, child by child.
    for (const auto& version : store.versions()) {
        if (!version.parent_id) continue;
        const std::string replayed =
            apply_confirmed_edits(store.at(*version.parent_id).text, version.changelog);
        REQUIRE_OR_FAIL(replayed == version.text,
                        "byte mismatch replaying " + version.version_id.substr(0, 12));
    }

    // Filter law across 200 randomized outcome sets.
    util::SplitMix64 rng(555);
    for (int iter = 0; iter < 200; ++iter) {
        std::vector<TaskOutcome> outcomes;
        std::vector<std::string> batch;
        const int n = 1 + static_cast<int>(rng.next() % 6);
        for (int i = 0; i < n; ++i) {
            TaskOutcome outcome;
            outcome.task_id = "t" + std::to_string(i);
            outcome.correct = rng.next() % 2 == 0;
            SelfDebugTrace trace;
            trace.task_id = outcome.task_id;
            trace.resolved = outcome.correct;
            trace.rounds_used = static_cast<int>(rng.next() % 3);
            Attempt attempt;
            attempt.asm_text = "x";
            attempt.verdict = trace.resolved ? pass_verdict()
                                             : fail_verdict(VerdictStatus::WrongOutput,
                                                            FailureDiagnostics{
                                                                FailureStage::wrong_output,
                                                                "diverged", std::nullopt});
            trace.attempts.push_back(attempt);
            outcome.generation_trace = trace;
            outcomes.push_back(outcome);
            batch.push_back(outcome.task_id);
        }
        LearningBatchSignal signal = collect_signal(outcomes, batch, 100000);
        for (const auto& trace : signal.trajectories) {
            REQUIRE_OR_FAIL(trace.resolved && trace.rounds_used >= 1,
                            "filter law violated on iteration " + std::to_string(iter));
        }
    }
    return true;
}

// ---- criterion 8 ----------------------------------------------------------

bool conservative_failure(std::string& detail) {
    const std::string baseline =
        util::read_file(testsupport::fixtures_dir() / "prompts" / "baseline_x86_64.txt");
    MetaTemplates templates{
        util::read_file(testsupport::fixtures_dir() / "meta" / "propose.txt"),
        util::read_file(testsupport::fixtures_dir() / "meta" / "confirm.txt")};

    auto qualifying_outcome = [](const std::string& id) {
        TaskOutcome outcome;
        outcome.task_id = id;
        outcome.correct = true;
        SelfDebugTrace trace;
        trace.task_id = id;
        trace.resolved = true;
        trace.rounds_used = 1;
        Attempt bad;
        bad.index = 0;
        bad.asm_text = "bad listing";
        bad.verdict = fail_verdict(VerdictStatus::WrongOutput,
                                   FailureDiagnostics{FailureStage::wrong_output, "diff",
                                                      std::nullopt});
        Attempt good;
        good.index = 1;
        good.kind = AttemptKind::debug_fix;
        good.asm_text = "good listing";
        good.verdict = pass_verdict();
        trace.attempts = {bad, good};
        outcome.generation_trace = trace;
        return outcome;
    };

    // Both failure points, each driven through the real propose/confirm
    // parsers via a scripted gateway.
    for (const std::string failure_point : {"propose", "confirm"}) {
        std::map<std::string, std::vector<std::string>> script;
        for (int batch = 1; batch <= 2; ++batch) {
            const std::string tag = "e1b" + std::to_string(batch);
            if (failure_point == "propose") {
                script["meta:propose:" + tag] = {"no structured list here, just prose"};
            } else {
                script["meta:propose:" + tag] = {
                    "EDIT\nkind: add_rule\nsection: s\ncontent: rule\nrationale: r\nEND"};
                script["meta:confirm:" + tag] = {"whatever sounds good"};
            }
        }
        Gateway gateway = testsupport::make_scripted_gateway(script);

        PromptStore store = PromptStore::init(baseline);
        int batches_reached = 0;
        LearnDeps deps;
        deps.compile = [&](const std::string& id, const PromptVersion&, int, int batch) {
            if (batch > batches_reached) batches_reached = batch;
            return qualifying_outcome(id);
        };
        deps.validate = [](const std::vector<std::string>&, const PromptVersion&, int) {
            return 0.5;
        };
        deps.propose = [&](const PromptVersion& current, const LearningBatchSignal& signal,
                           int epoch, int batch) {
            return propose_edits(current, signal, gateway, ModelOptions{}, templates,
                                 "meta:propose:e" + std::to_string(epoch) + "b" +
                                     std::to_string(batch),
                                 nullptr);
        };
        deps.confirm = [&](const PromptVersion& current,
                           const std::vector<EditProposal>& proposals, int epoch, int batch) {
            return confirm_edits(current, proposals, gateway, ModelOptions{}, templates,
                                 "meta:confirm:e" + std::to_string(epoch) + "b" +
                                     std::to_string(batch));
        };

        LearnParams params{1, 1, 8000};
        LearnResult result = learn(store, {"a", "b"}, {"v"}, params, deps);
        REQUIRE_OR_FAIL(store.versions().size() == 1,
                        failure_point + " failure must leave the prompt untouched");
        REQUIRE_OR_FAIL(store.root().text == baseline,
                        failure_point + " failure altered the prompt bytes");
        REQUIRE_OR_FAIL(batches_reached == 2,
                        failure_point + " failure did not advance to the next batch");
        REQUIRE_OR_FAIL(result.selected_id == store.root().version_id, "selected not root");
    }
    return true;
}

// ---- criterion 9 ----------------------------------------------------------

bool acc_perf_subset(std::string& detail) {
    bool rejected = false;
    try {
        make_eval_record("bad", false, true, 0, std::nullopt, "v");
    } catch (const ValidationError&) {
        rejected = true;
    }
    REQUIRE_OR_FAIL(rejected, "superior_perf without correctness was not rejected");

    util::SplitMix64 rng(2718);
    for (int iter = 0; iter < 1000; ++iter) {
        const int total = 1 + static_cast<int>(rng.next() % 60);
        std::vector<EvalRecord> records;
        for (int i = 0; i < total; ++i) {
            const bool correct = rng.next() % 2 == 0;
            const bool superior = correct && rng.next() % 3 == 0;
            records.push_back(make_eval_record(
                "t" + std::to_string(i), correct, superior, static_cast<int>(rng.next() % 3),
                correct ? std::optional<double>(0.5 + (rng.next() % 200) / 100.0) : std::nullopt,
                "v"));
        }
        REQUIRE_OR_FAIL(compute_acc_perf(records).count <= compute_acc(records).count,
                        "acc_perf exceeded acc");
    }
    return true;
}

// ---- criterion 10 ---------------------------------------------------------

bool bench_self_calibration(std::string& detail) {
    const auto scratch = testsupport::fresh_scratch("acc-bench");
    // Generate the -O3 assembly for the saxpy kernel: timing that listing
    // against the -O3 reference binary is self-vs-self and should land
    // within the documented noise band.
    const auto ir = testsupport::fixtures_dir() / "tasks" / "saxpy" / "func.ll";
    const auto asm_path = scratch / "saxpy_o3.s";
    SpawnSpec spec;
    spec.argv = {"clang", "-x", "ir", "-O3", "-S", ir.string(), "-o", asm_path.string()};
    spec.timeout = std::chrono::milliseconds(60000);
    ProcessResult gen = run_process(spec);
    REQUIRE_OR_FAIL(gen.exit_code == 0, "clang -S -O3 failed: " + gen.stderr_data);

    CliResult res = run_cli({"bench", "--config", cfg("bench.json"), "--task", "saxpy", "--asm",
                             asm_path.string(), "--out", (scratch / "out").string()});
    REQUIRE_OR_FAIL(res.exit_code == 0,
                    "bench exit " + std::to_string(res.exit_code) + ": " + res.err + res.out);
    const auto pos = res.out.find("speedup: ");
    REQUIRE_OR_FAIL(pos != std::string::npos, "no speedup line in:\n" + res.out);
    const double ratio = std::stod(res.out.substr(pos + 9));
    REQUIRE_OR_FAIL(ratio >= 0.85 && ratio <= 1.15,
                    "self-vs-self speedup " + std::to_string(ratio) + " outside [0.85, 1.15]");

    // Protocol audit: the persisted series flags runs 4-8 as kept.
    const std::string timing =
        util::read_file(scratch / "out" / "bench" / "saxpy-candidate.timing");
    for (int k = 4; k <= 8; ++k) {
        REQUIRE_OR_FAIL(timing.find("\n" + std::to_string(k) + " ") != std::string::npos,
                        "timing record missing run " + std::to_string(k));
    }
    REQUIRE_OR_FAIL(timing.find(" kept") != std::string::npos &&
                        timing.find(" discarded") != std::string::npos,
                    "kept/discarded flags missing");
    return true;
}

}  // namespace

int main() {
    struct Criterion {
        int number;
        const char* name;
        std::function<bool(std::string&)> fn;
    };
    const std::vector<Criterion> criteria = {
        {1, "metric formatting fidelity", metric_formatting},
        {2, "speedup fidelity", speedup_fidelity},
        {3, "timing protocol", timing_protocol},
        {4, "self-debug budget law", self_debug_budget_law},
        {5, "pipeline determinism", pipeline_determinism},
        {6, "real-toolchain smoke", toolchain_smoke},
        {7, "prompt-evolution lineage", evolution_lineage},
        {8, "conservative-failure law", conservative_failure},
        {9, "ACC+Perf subset of ACC", acc_perf_subset},
        {10, "bench self-calibration", bench_self_calibration},
    };

    int failures = 0;
    for (const auto& criterion : criteria) {
        std::string detail;
        bool ok = false;
        try {
            ok = criterion.fn(detail);
        } catch (const std::exception& ex) {
            detail = std::string("exception: ") + ex.what();
        }
        if (ok) {
            std::printf("PASS  criterion %2d: %s\n", criterion.number, criterion.name);
        } else {
            ++failures;
            std::printf("FAIL  criterion %2d: %s -- %s\n", criterion.number, criterion.name,
                        detail.c_str());
        }
        std::fflush(stdout);
    }
    if (failures != 0) {
        std::printf("%d criterion(s) failed\n", failures);
        return 1;
    }
    std::printf("all %zu criteria passed\n", criteria.size());
    return 0;
}
