#include "irasm/task.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "irasm/errors.hpp"
#include "irasm/util.hpp"

namespace irasm {

namespace {

using nlohmann::json;

// Parses "key = value" lines; '#' starts a comment, blank lines are skipped.
// Repeated keys accumulate in `repeats`.
struct KvFile {
    std::map<std::string, std::string> values;
    std::vector<std::pair<std::string, std::string>> entries;  // in file order
};

KvFile parse_kv(const std::string& text, const std::string& what) {
    KvFile kv;
    std::size_t line_no = 0;
    for (const auto& raw : util::split_lines(text)) {
        ++line_no;
        std::string line = util::trim(raw);
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError(what + ": line " + std::to_string(line_no) +
                             " is not a key = value entry: '" + line + "'");
        }
        std::string key = util::trim(line.substr(0, eq));
        std::string value = util::trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ParseError(what + ": empty key at line " + std::to_string(line_no));
        }
        kv.values[key] = value;
        kv.entries.emplace_back(key, value);
    }
    return kv;
}

std::uint64_t parse_u64(const std::string& text, const std::string& what) {
    try {
        std::size_t used = 0;
        unsigned long long v = std::stoull(text, &used);
        if (used != text.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ParseError(what + ": not an unsigned integer: '" + text + "'");
    }
}

TaskSpec load_task_dir(const std::filesystem::path& dir) {
    const auto meta_path = dir / "task.meta";
    if (!std::filesystem::exists(meta_path)) {
        throw ParseError("task directory missing task.meta: " + dir.string());
    }
    KvFile meta = parse_kv(util::read_file(meta_path), meta_path.string());

    TaskSpec task;
    auto need = [&](const char* key) -> const std::string& {
        auto it = meta.values.find(key);
        if (it == meta.values.end()) {
            throw ValidationError("task.meta in " + dir.string() + " missing key '" + key + "'");
        }
        return it->second;
    };

    task.id = need("id");
    const std::string& level = need("level");
    if (level == "L1") {
        task.level = TaskLevel::L1;
    } else if (level == "L2") {
        task.level = TaskLevel::L2;
    } else {
        throw ValidationError("task '" + task.id + "': unknown level '" + level + "'");
    }
    const std::string& checker = need("checker");
    if (checker == "stdout_exact") {
        task.checker = CheckerMode::stdout_exact;
    } else if (checker == "checksum_lines") {
        task.checker = CheckerMode::checksum_lines;
    } else {
        throw ValidationError("task '" + task.id + "': unknown checker '" + checker + "'");
    }
    if (auto it = meta.values.find("seed"); it != meta.values.end()) {
        task.seed = parse_u64(it->second, "task '" + task.id + "' seed");
    }
    if (auto it = meta.values.find("timeout_ms"); it != meta.values.end()) {
        task.timeout = std::chrono::milliseconds(
            parse_u64(it->second, "task '" + task.id + "' timeout_ms"));
    }

    task.ir_text = util::read_file(dir / "func.ll");
    task.driver_source = util::read_file(dir / "driver.c");
    return task;
}

void validate_task(const TaskSpec& task) {
    if (task.ir_text.empty() || task.ir_text.find("define ") == std::string::npos) {
        throw ValidationError("task '" + task.id +
                              "': ir_text is empty or has no function definition");
    }
    if (task.level == TaskLevel::L2) {
        if (task.checker != CheckerMode::checksum_lines) {
            throw ValidationError("task '" + task.id + "': L2 tasks require checker = checksum_lines");
        }
        if (!task.seed) {
            throw ValidationError("task '" + task.id + "': seed required for L2");
        }
    } else {
        if (task.checker != CheckerMode::stdout_exact) {
            throw ValidationError("task '" + task.id + "': L1 tasks require checker = stdout_exact");
        }
    }
    if (task.timeout.count() <= 0) {
        throw ValidationError("task '" + task.id + "': timeout must be positive");
    }
}

}  // namespace

const char* to_string(ArchName name) {
    return name == ArchName::x86_64 ? "x86_64" : "aarch64";
}

const char* to_string(TaskLevel level) {
    return level == TaskLevel::L1 ? "L1" : "L2";
}

const char* to_string(CheckerMode mode) {
    return mode == CheckerMode::stdout_exact ? "stdout_exact" : "checksum_lines";
}

ArchName parse_arch_name(const std::string& text) {
    if (text == "x86_64") return ArchName::x86_64;
    if (text == "aarch64") return ArchName::aarch64;
    throw ValidationError("unknown arch '" + text + "' (expected x86_64 or aarch64)");
}

ExecutionMode parse_execution_mode(const std::string& text) {
    if (text == "native") return ExecutionMode::native;
    if (text == "emulated") return ExecutionMode::emulated;
    throw ValidationError("unknown execution_mode '" + text + "'");
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw ParseError("manifest not found: " + path.string());
    }
    KvFile kv = parse_kv(util::read_file(path), path.string());

    DatasetManifest manifest;
    if (auto it = kv.values.find("dataset_name"); it != kv.values.end()) {
        manifest.dataset_name = it->second;
    } else {
        throw ParseError(path.string() + ": missing dataset_name");
    }
    if (auto it = kv.values.find("arch"); it != kv.values.end()) {
        manifest.arch.name = parse_arch_name(it->second);
    } else {
        throw ParseError(path.string() + ": missing arch");
    }
    if (auto it = kv.values.find("execution_mode"); it != kv.values.end()) {
        manifest.arch.execution_mode = parse_execution_mode(it->second);
    }

    const auto base = path.parent_path();
    std::set<std::string> seen_ids;
    for (const auto& [key, value] : kv.entries) {
        if (key != "task") continue;
        TaskSpec task = load_task_dir(base / value);
        validate_task(task);
        if (!seen_ids.insert(task.id).second) {
            throw ValidationError("duplicate task id '" + task.id + "' in " + path.string());
        }
        manifest.tasks.push_back(std::move(task));
        manifest.task_dirs.push_back(value);
    }
    if (manifest.tasks.empty()) {
        throw ValidationError(path.string() + ": manifest lists no tasks");
    }
    return manifest;
}

std::filesystem::path serialize_manifest(const DatasetManifest& manifest,
                                         const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ostringstream out;
    out << "dataset_name = " << manifest.dataset_name << "\n";
    out << "arch = " << to_string(manifest.arch.name) << "\n";
    out << "execution_mode = "
        << (manifest.arch.execution_mode == ExecutionMode::native ? "native" : "emulated")
        << "\n";
    for (std::size_t i = 0; i < manifest.tasks.size(); ++i) {
        const TaskSpec& task = manifest.tasks[i];
        std::string rel = i < manifest.task_dirs.size() && !manifest.task_dirs[i].empty()
                              ? manifest.task_dirs[i]
                              : ("tasks/" + task.id);
        out << "task = " << rel << "\n";

        std::ostringstream meta;
        meta << "id = " << task.id << "\n";
        meta << "level = " << to_string(task.level) << "\n";
        meta << "checker = " << to_string(task.checker) << "\n";
        if (task.seed) meta << "seed = " << *task.seed << "\n";
        meta << "timeout_ms = " << task.timeout.count() << "\n";

        const auto task_dir = dir / rel;
        util::write_file(task_dir / "task.meta", meta.str());
        util::write_file(task_dir / "func.ll", task.ir_text);
        util::write_file(task_dir / "driver.c", task.driver_source);
    }
    const auto manifest_path = dir / "dataset.manifest";
    util::write_file(manifest_path, out.str());
    return manifest_path;
}

SplitAssignment split_dataset(const DatasetManifest& manifest, SplitCounts counts,
                              std::uint64_t seed) {
    const std::size_t total = counts.train + counts.validation + counts.test;
    if (total > manifest.tasks.size()) {
        throw CountError("split counts (" + std::to_string(total) +
                         ") exceed available tasks (" + std::to_string(manifest.tasks.size()) + ")");
    }

    std::vector<std::string> ids;
    ids.reserve(manifest.tasks.size());
    for (const auto& task : manifest.tasks) ids.push_back(task.id);

    util::SplitMix64 rng(seed);
    for (std::size_t i = ids.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.next() % i);
        std::swap(ids[i - 1], ids[j]);
    }

    SplitAssignment split;
    auto it = ids.begin();
    split.train.assign(it, it + static_cast<std::ptrdiff_t>(counts.train));
    it += static_cast<std::ptrdiff_t>(counts.train);
    split.validation.assign(it, it + static_cast<std::ptrdiff_t>(counts.validation));
    it += static_cast<std::ptrdiff_t>(counts.validation);
    split.test.assign(it, it + static_cast<std::ptrdiff_t>(counts.test));
    return split;
}

SplitAssignment load_split_file(const std::filesystem::path& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(util::read_file(path));
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError("split file " + path.string() + ": " + ex.what());
    }
    SplitAssignment split;
    auto read_list = [&](const char* key, std::vector<std::string>& out) {
        if (!doc.contains(key)) return;
        for (const auto& v : doc.at(key)) out.push_back(v.get<std::string>());
    };
    read_list("train", split.train);
    read_list("validation", split.validation);
    read_list("test", split.test);
    return split;
}

void save_split_file(const SplitAssignment& split, const std::filesystem::path& path) {
    nlohmann::json doc;
    doc["train"] = split.train;
    doc["validation"] = split.validation;
    doc["test"] = split.test;
    util::write_file(path, doc.dump(2) + "\n");
}

const TaskSpec* find_task(const DatasetManifest& manifest, const std::string& id) {
    for (const auto& task : manifest.tasks) {
        if (task.id == id) return &task;
    }
    return nullptr;
}

std::vector<std::size_t> indices_by_ir_length(const DatasetManifest& manifest) {
    std::vector<std::size_t> idx(manifest.tasks.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return util::split_lines(manifest.tasks[a].ir_text).size() >
               util::split_lines(manifest.tasks[b].ir_text).size();
    });
    return idx;
}

}  // namespace irasm
