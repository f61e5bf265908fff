#pragma once

#include <string>
#include <vector>

#include "irasm/chat.hpp"
#include "irasm/task.hpp"
#include "irasm/toolchain.hpp"

namespace irasm {

// The IR slot every usable prompt template must contain: a fenced
// `llvm ir` block whose body is the "..." placeholder.
bool has_ir_placeholder(const std::string& prompt_text);

// Renders the one-shot translation request: the template with the IR
// substituted into the `llvm ir` fence and architecture wording applied.
// For x86_64 the output is the template byte-for-byte apart from the IR.
std::vector<ChatMessage> render_generation_prompt(const std::string& prompt_text,
                                                  const std::string& ir_text,
                                                  const ArchTarget& arch);

// Builds the corrective follow-up for a failed attempt: stage label,
// truncated diagnostic excerpt, and the mandatory output template.
ChatMessage make_debug_message(const FailureDiagnostics& diagnostics);

// Appends the debug message to the prior conversation (which must already
// contain at least one assistant reply).
std::vector<ChatMessage> render_debug_prompt(const std::vector<ChatMessage>& prior,
                                             const FailureDiagnostics& diagnostics);

// Renders the rewrite-for-speed request over a verified-correct listing:
// template with IR and current assembly each substituted once, plus the
// optimization instruction.
std::vector<ChatMessage> render_optimization_prompt(const std::string& prompt_text,
                                                    const TaskSpec& task,
                                                    const ArchTarget& arch,
                                                    const std::string& current_asm);

// Returns the contents of the last fenced block labeled `assembly`, with
// leading/trailing blank lines trimmed and interior bytes preserved.
// Throws NoAssemblyBlock when the response has no such block.
std::string extract_assembly(const std::string& response_content);

// Diagnostic excerpts embedded in debug prompts are capped at this many
// characters (head and tail halves around an elision marker).
inline constexpr std::size_t kDiagnosticExcerptCap = 4096;

}  // namespace irasm
