#pragma once

#include <stdexcept>
#include <string>

namespace irasm {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : Error {
    using Error::Error;
};

struct ParseError : Error {
    using Error::Error;
};

struct ValidationError : Error {
    using Error::Error;
};

struct CountError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

// llm-gateway
struct TemplateError : Error {
    using Error::Error;
};

struct NoAssemblyBlock : Error {
    using Error::Error;
};

struct AuthError : Error {
    using Error::Error;
};

struct ProviderError : Error {
    using Error::Error;
};

struct ReplayExhausted : Error {
    using Error::Error;
};

struct ReplayMismatch : Error {
    using Error::Error;
};

// toolchain / executor
struct ToolchainMissing : Error {
    using Error::Error;
};

struct ReferenceBuildFailure : Error {
    using Error::Error;
};

struct SpawnError : Error {
    using Error::Error;
};

struct OracleInvalid : Error {
    using Error::Error;
};

// perf-bench
struct MeasurementError : Error {
    MeasurementError(const std::string& msg, int run_index)
        : Error(msg), index(run_index) {}
    int index;  // 1-based run index that failed
};

struct ProtocolError : Error {
    using Error::Error;
};

struct DomainError : Error {
    using Error::Error;
};

// prompt-evolution
struct MetaFormatError : Error {
    using Error::Error;
};

struct AnchorError : Error {
    using Error::Error;
};

struct EmptyCandidates : Error {
    using Error::Error;
};

// reporting
struct EmptyRecords : Error {
    using Error::Error;
};

struct NoSolvedTasks : Error {
    using Error::Error;
};

}  // namespace irasm
