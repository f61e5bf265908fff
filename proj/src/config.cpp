#include "irasm/config.hpp"

#include <nlohmann/json.hpp>

#include "irasm/errors.hpp"
#include "irasm/util.hpp"

namespace irasm {

namespace {

using nlohmann::json;

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_absolute()) return path;
    return base / path;
}

}  // namespace

int default_debug_rounds(TaskLevel level, ArchName arch) {
    if (arch == ArchName::aarch64) return 4;
    return level == TaskLevel::L1 ? 1 : 2;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        const ConfigOverrides& overrides) {
    json doc;
    try {
        doc = json::parse(util::read_file(path), nullptr, true, /*ignore_comments=*/true);
    } catch (const json::exception& ex) {
        throw ConfigError("config " + path.string() + ": " + ex.what());
    }
    const auto base = std::filesystem::absolute(path).parent_path();

    ExperimentConfig cfg;
    try {
        if (!doc.contains("manifest")) throw ConfigError("config: missing 'manifest'");
        cfg.manifest_path = resolve(base, doc.at("manifest").get<std::string>());
        cfg.output_dir = resolve(base, doc.value("output_dir", std::string("out")));
        if (overrides.output_dir) {
            cfg.output_dir = resolve(std::filesystem::current_path(), *overrides.output_dir);
        }

        if (doc.contains("arch")) {
            const auto& a = doc.at("arch");
            cfg.arch.name = parse_arch_name(a.at("name").get<std::string>());
            if (a.contains("execution_mode")) {
                cfg.arch.execution_mode =
                    parse_execution_mode(a.at("execution_mode").get<std::string>());
            }
            cfg.arch_overridden = true;
        }
        if (overrides.arch) {
            cfg.arch.name = parse_arch_name(*overrides.arch);
            cfg.arch.execution_mode = cfg.arch.name == ArchName::x86_64
                                          ? ExecutionMode::native
                                          : ExecutionMode::emulated;
            cfg.arch_overridden = true;
        }

        if (doc.contains("split")) {
            const auto& s = doc.at("split");
            if (s.contains("file")) {
                cfg.split.file = resolve(base, s.at("file").get<std::string>());
            } else {
                SplitCounts counts;
                counts.train = s.value("train", 0);
                counts.validation = s.value("validation", 0);
                counts.test = s.value("test", 0);
                cfg.split.counts = counts;
                cfg.split.seed = s.value("seed", 0ULL);
            }
        }

        if (doc.contains("provider")) {
            const auto& p = doc.at("provider");
            const std::string kind = p.value("kind", std::string("replay"));
            if (kind == "http") {
                cfg.provider.kind = ProviderKind::http;
            } else if (kind == "replay") {
                cfg.provider.kind = ProviderKind::replay;
            } else {
                throw ConfigError("config: unknown provider kind '" + kind + "'");
            }
            cfg.provider.endpoint = p.value("endpoint", std::string());
            cfg.provider.api_key_env = p.value("api_key_env", std::string("IRASM_API_KEY"));
            cfg.provider.retry_limit = p.value("retry_limit", 3);
            cfg.provider.backoff_base =
                std::chrono::milliseconds(p.value("backoff_base_ms", 500));
            if (p.contains("replay_script")) {
                cfg.provider.replay_script = resolve(base, p.at("replay_script").get<std::string>());
            }
            if (p.contains("cache_dir")) {
                cfg.provider.cache_dir = resolve(base, p.at("cache_dir").get<std::string>());
            }
        } else {
            throw ConfigError("config: missing 'provider'");
        }

        if (doc.contains("model")) {
            const auto& m = doc.at("model");
            cfg.model.model = m.value("name", std::string("replay-model"));
            cfg.model.temperature = m.value("temperature", 0.0);
            cfg.model.max_tokens = m.value("max_tokens", 8192);
        }

        if (doc.contains("prompt")) {
            const auto& pr = doc.at("prompt");
            if (pr.contains("file")) {
                cfg.prompt.file = resolve(base, pr.at("file").get<std::string>());
            }
            if (pr.contains("store_dir")) {
                cfg.prompt.store_dir = resolve(base, pr.at("store_dir").get<std::string>());
                cfg.prompt.version = pr.value("version", std::string());
            }
        } else {
            throw ConfigError("config: missing 'prompt'");
        }
        if (overrides.prompt_file) {
            cfg.prompt.file = resolve(std::filesystem::current_path(), *overrides.prompt_file);
            cfg.prompt.store_dir.reset();
        }

        if (doc.contains("pipeline")) {
            const auto& pl = doc.at("pipeline");
            if (pl.contains("max_debug_rounds_generation")) {
                cfg.max_debug_rounds_generation = pl.at("max_debug_rounds_generation").get<int>();
            }
            if (pl.contains("max_debug_rounds_optimization")) {
                cfg.max_debug_rounds_optimization =
                    pl.at("max_debug_rounds_optimization").get<int>();
            }
            if (pl.contains("optimization_rounds")) {
                cfg.optimization_rounds = pl.at("optimization_rounds").get<int>();
            }
            if (pl.contains("measure_each_round")) {
                cfg.measure_each_round = pl.at("measure_each_round").get<bool>();
            }
            cfg.fresh_context_debug = pl.value("fresh_context_debug", false);
        }

        if (doc.contains("perf")) {
            const auto& pf = doc.at("perf");
            if (pf.contains("enabled")) cfg.perf_enabled = pf.at("enabled").get<bool>();
            cfg.perf_runs = pf.value("runs", 11);
            cfg.screen_runs = pf.value("screen_runs", 11);
            if (pf.contains("lock_file")) {
                cfg.lock_file = resolve(base, pf.at("lock_file").get<std::string>());
            }
        }
        if (cfg.lock_file.empty()) {
            cfg.lock_file = cfg.output_dir / "perf.lock";
        }

        if (doc.contains("toolchain")) {
            const auto& tc = doc.at("toolchain");
            cfg.toolchain.compiler_path = tc.value("compiler", std::string("clang"));
            if (tc.contains("extra_flags")) {
                for (const auto& f : tc.at("extra_flags")) {
                    cfg.toolchain.extra_flags.push_back(f.get<std::string>());
                }
            }
            cfg.toolchain.target_triple = tc.value("target_triple", std::string());
            if (tc.contains("emulator")) {
                for (const auto& e : tc.at("emulator")) {
                    cfg.toolchain.emulator_prefix.push_back(e.get<std::string>());
                }
            }
        }
        cfg.toolchain.work_dir = cfg.output_dir / "work";

        if (doc.contains("learn")) {
            const auto& l = doc.at("learn");
            cfg.learn.epochs = l.value("epochs", 3);
            cfg.learn.batch_size = l.value("batch_size", 5);
            cfg.learn.token_budget = l.value("token_budget", 8000);
            if (l.contains("store_dir")) {
                cfg.learn_store_dir = resolve(base, l.at("store_dir").get<std::string>());
            }
            if (l.contains("meta_propose")) {
                cfg.meta_propose_path = resolve(base, l.at("meta_propose").get<std::string>());
            }
            if (l.contains("meta_confirm")) {
                cfg.meta_confirm_path = resolve(base, l.at("meta_confirm").get<std::string>());
            }
        }
        if (cfg.learn_store_dir.empty()) {
            cfg.learn_store_dir = cfg.output_dir / "prompt-store";
        }

        cfg.jobs = doc.value("jobs", 1);
        if (overrides.jobs) cfg.jobs = *overrides.jobs;
        if (cfg.jobs < 1) throw ConfigError("config: jobs must be >= 1");
        cfg.max_output_bytes = doc.value("max_output_bytes", std::size_t{1} << 20);
        cfg.clean = overrides.clean;
    } catch (const json::exception& ex) {
        throw ConfigError("config " + path.string() + ": " + ex.what());
    }

    cfg.digest = util::sha256_hex(effective_config_json(cfg));
    return cfg;
}

std::string effective_config_json(const ExperimentConfig& cfg) {
    json doc;
    doc["manifest"] = cfg.manifest_path.string();
    doc["output_dir"] = cfg.output_dir.string();
    doc["arch"] = {{"name", to_string(cfg.arch.name)},
                   {"execution_mode",
                    cfg.arch.execution_mode == ExecutionMode::native ? "native" : "emulated"},
                   {"overridden", cfg.arch_overridden}};
    if (cfg.split.file) {
        doc["split"] = {{"file", cfg.split.file->string()}};
    } else if (cfg.split.counts) {
        doc["split"] = {{"train", cfg.split.counts->train},
                        {"validation", cfg.split.counts->validation},
                        {"test", cfg.split.counts->test},
                        {"seed", cfg.split.seed}};
    }
    doc["provider"] = {{"kind", cfg.provider.kind == ProviderKind::http ? "http" : "replay"},
                       {"endpoint", cfg.provider.endpoint},
                       {"api_key_env", cfg.provider.api_key_env},
                       {"retry_limit", cfg.provider.retry_limit},
                       {"backoff_base_ms", cfg.provider.backoff_base.count()},
                       {"replay_script", cfg.provider.replay_script.string()},
                       {"cache_dir", cfg.provider.cache_dir.string()}};
    doc["model"] = {{"name", cfg.model.model},
                    {"temperature", cfg.model.temperature},
                    {"max_tokens", cfg.model.max_tokens}};
    json prompt;
    if (cfg.prompt.file) prompt["file"] = cfg.prompt.file->string();
    if (cfg.prompt.store_dir) {
        prompt["store_dir"] = cfg.prompt.store_dir->string();
        prompt["version"] = cfg.prompt.version;
    }
    doc["prompt"] = std::move(prompt);
    json pipeline;
    if (cfg.max_debug_rounds_generation) {
        pipeline["max_debug_rounds_generation"] = *cfg.max_debug_rounds_generation;
    }
    if (cfg.max_debug_rounds_optimization) {
        pipeline["max_debug_rounds_optimization"] = *cfg.max_debug_rounds_optimization;
    }
    if (cfg.optimization_rounds) pipeline["optimization_rounds"] = *cfg.optimization_rounds;
    if (cfg.measure_each_round) pipeline["measure_each_round"] = *cfg.measure_each_round;
    pipeline["fresh_context_debug"] = cfg.fresh_context_debug;
    doc["pipeline"] = std::move(pipeline);
    json perf;
    if (cfg.perf_enabled) perf["enabled"] = *cfg.perf_enabled;
    perf["runs"] = cfg.perf_runs;
    perf["screen_runs"] = cfg.screen_runs;
    perf["lock_file"] = cfg.lock_file.string();
    doc["perf"] = std::move(perf);
    doc["toolchain"] = {{"compiler", cfg.toolchain.compiler_path.string()},
                        {"extra_flags", cfg.toolchain.extra_flags},
                        {"target_triple", cfg.toolchain.target_triple},
                        {"emulator", cfg.toolchain.emulator_prefix}};
    doc["learn"] = {{"epochs", cfg.learn.epochs},
                    {"batch_size", cfg.learn.batch_size},
                    {"token_budget", cfg.learn.token_budget},
                    {"store_dir", cfg.learn_store_dir.string()},
                    {"meta_propose", cfg.meta_propose_path.string()},
                    {"meta_confirm", cfg.meta_confirm_path.string()}};
    doc["jobs"] = cfg.jobs;
    doc["max_output_bytes"] = cfg.max_output_bytes;
    return doc.dump(2) + "\n";
}

PipelineConfig pipeline_config_for(const ExperimentConfig& cfg, const TaskSpec& task) {
    PipelineConfig pl;
    const int fallback = default_debug_rounds(task.level, cfg.arch.name);
    pl.max_debug_rounds_generation = cfg.max_debug_rounds_generation.value_or(fallback);
    pl.max_debug_rounds_optimization =
        cfg.max_debug_rounds_optimization.value_or(pl.max_debug_rounds_generation);
    pl.optimization_rounds =
        cfg.optimization_rounds.value_or(task.level == TaskLevel::L2 ? 2 : 0);
    pl.measure_each_round = cfg.measure_each_round.value_or(task.level == TaskLevel::L2);
    pl.measure_perf = cfg.perf_enabled.value_or(task.level == TaskLevel::L2);
    pl.limits.wall_timeout = task.timeout;
    pl.limits.max_output_bytes = cfg.max_output_bytes;
    pl.perf_runs = cfg.perf_runs;
    pl.screen_runs = cfg.screen_runs;
    pl.lock_file = cfg.lock_file;
    pl.fresh_context_debug = cfg.fresh_context_debug;
    return pl;
}

}  // namespace irasm
