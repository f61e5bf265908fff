#include <doctest.h>

#include "irasm/errors.hpp"
#include "irasm/task.hpp"
#include "irasm/toolchain.hpp"
#include "irasm/util.hpp"
#include "support.hpp"

using namespace irasm;

namespace {

TaskSpec fib_task() {
    DatasetManifest manifest =
        load_manifest(testsupport::fixtures_dir() / "manifests" / "micro4.manifest");
    return *find_task(manifest, "fib");
}

TaskSpec saxpy_task() {
    DatasetManifest manifest =
        load_manifest(testsupport::fixtures_dir() / "manifests" / "micro4.manifest");
    return *find_task(manifest, "saxpy");
}

ToolchainConfig config_in(const std::filesystem::path& dir) {
    ToolchainConfig config;
    config.work_dir = dir;
    return config;
}

std::string good_fib_asm() {
    return util::read_file(testsupport::fixtures_dir() / "asm" / "fib_scalar.s");
}

}  // namespace

TEST_CASE("toolchain: reference builds at -O0 and -O3 produce distinct runnable binaries") {
    auto dir = testsupport::fresh_scratch("tc-ref");
    ToolchainConfig config = config_in(dir);
    TaskSpec task = fib_task();

    BuildProduct o0 = build_reference(task, "-O0", config);
    REQUIRE(o0.success);
    CHECK(o0.kind == BuildKind::reference_O0);
    CHECK(std::filesystem::exists(o0.executable_path));

    BuildProduct o3 = build_reference(task, "-O3", config);
    REQUIRE(o3.success);
    CHECK(o3.kind == BuildKind::reference_O3);
    CHECK(o3.executable_path != o0.executable_path);
}

TEST_CASE("toolchain: IR referencing a missing symbol fails at link with captured log") {
    auto dir = testsupport::fresh_scratch("tc-undef");
    ToolchainConfig config = config_in(dir);
    TaskSpec task = fib_task();
    task.ir_text =
        "declare i64 @not_provided_anywhere(i32)\n"
        "define i64 @fib_iter(i32 %n) {\n"
        "  %r = call i64 @not_provided_anywhere(i32 %n)\n"
        "  ret i64 %r\n"
        "}\n";
    BuildProduct product = build_reference(task, "-O0", config);
    CHECK_FALSE(product.success);
    CHECK(product.build_log.find("not_provided_anywhere") != std::string::npos);
}

TEST_CASE("toolchain: candidate with unknown mnemonic yields assemble diagnostics") {
    auto dir = testsupport::fresh_scratch("tc-badasm");
    ToolchainConfig config = config_in(dir);
    auto result = build_candidate(fib_task(), "\t.text\nfib_iter:\n\tmovq3 %rdi, %rax\n\tretq\n",
                                  config, "a0");
    REQUIRE(std::holds_alternative<FailureDiagnostics>(result));
    const auto& diag = std::get<FailureDiagnostics>(result);
    CHECK(diag.stage == FailureStage::assemble);
    CHECK(diag.excerpt.find("movq3") != std::string::npos);
}

TEST_CASE("toolchain: candidate missing the kernel symbol fails at link") {
    auto dir = testsupport::fresh_scratch("tc-nolink");
    ToolchainConfig config = config_in(dir);
    auto result = build_candidate(fib_task(),
                                  "\t.text\n\t.globl wrong_name\nwrong_name:\n\tretq\n",
                                  config, "a0");
    REQUIRE(std::holds_alternative<FailureDiagnostics>(result));
    const auto& diag = std::get<FailureDiagnostics>(result);
    CHECK(diag.stage == FailureStage::link);
    CHECK(diag.excerpt.find("fib_iter") != std::string::npos);
}

TEST_CASE("toolchain: valid candidate builds and the listing is persisted byte-for-byte") {
    auto dir = testsupport::fresh_scratch("tc-good");
    ToolchainConfig config = config_in(dir);
    const std::string asm_text = good_fib_asm();
    auto result = build_candidate(fib_task(), asm_text, config, "a0");
    REQUIRE(std::holds_alternative<BuildProduct>(result));
    const auto& product = std::get<BuildProduct>(result);
    CHECK(product.success);
    CHECK(std::filesystem::exists(product.executable_path));
    // No silent rewriting: the .s on disk is exactly what went in.
    CHECK(util::read_file(dir / "fib" / "cand-a0" / "candidate.s") == asm_text);
}

TEST_CASE("toolchain: rebuilding the same pair is stable") {
    auto dir = testsupport::fresh_scratch("tc-stable");
    ToolchainConfig config = config_in(dir);
    const std::string asm_text = good_fib_asm();
    auto r1 = build_candidate(fib_task(), asm_text, config, "a0");
    auto r2 = build_candidate(fib_task(), asm_text, config, "a0");
    CHECK(std::holds_alternative<BuildProduct>(r1) == std::holds_alternative<BuildProduct>(r2));
}

TEST_CASE("toolchain: the seed define appears identically in every build of an L2 task") {
    auto dir = testsupport::fresh_scratch("tc-seed");
    ToolchainConfig config = config_in(dir);
    TaskSpec task = saxpy_task();
    BuildProduct o0 = build_reference(task, "-O0", config);
    BuildProduct o3 = build_reference(task, "-O3", config);
    auto cand = build_candidate(
        task, util::read_file(testsupport::fixtures_dir() / "asm" / "saxpy_scalar.s"), config,
        "a0");
    REQUIRE(std::holds_alternative<BuildProduct>(cand));
    const std::string define = "-DSEED=4242ULL";
    CHECK(o0.build_log.find(define) != std::string::npos);
    CHECK(o3.build_log.find(define) != std::string::npos);
    CHECK(std::get<BuildProduct>(cand).build_log.find(define) != std::string::npos);
}

TEST_CASE("toolchain: missing compiler raises ToolchainMissing") {
    auto dir = testsupport::fresh_scratch("tc-missing");
    ToolchainConfig config = config_in(dir);
    config.compiler_path = "/no/such/compiler";
    CHECK_FALSE(toolchain_available(config));
    CHECK_THROWS_AS(build_reference(fib_task(), "-O0", config), ToolchainMissing);
    CHECK_THROWS_AS(build_candidate(fib_task(), ".text\n", config, "a0"), ToolchainMissing);
}

TEST_CASE("toolchain: command lines are logged verbatim") {
    auto dir = testsupport::fresh_scratch("tc-log");
    ToolchainConfig config = config_in(dir);
    BuildProduct o0 = build_reference(fib_task(), "-O0", config);
    CHECK(o0.build_log.find("$ clang") != std::string::npos);
    CHECK(o0.build_log.find("-x ir -O0") != std::string::npos);
}
