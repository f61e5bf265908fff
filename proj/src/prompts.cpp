#include "irasm/prompts.hpp"

#include <sstream>

#include "irasm/errors.hpp"
#include "irasm/util.hpp"

namespace irasm {

namespace {

constexpr std::string_view kIrSlot = "```llvm ir\n...\n```";
constexpr std::string_view kAsmSlot = "```assembly\n...\n```";

constexpr std::string_view kOutputTemplate =
    "You MUST use the following template to give out the complete, final target assembly "
    "code, and MUST NOT apply this template to any other part of your response:\n"
    "```assembly\n"
    "...(Provide the assembly code here)\n"
    "```";

std::string replace_all(std::string text, std::string_view from, std::string_view to) {
    std::size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
    return text;
}

std::string replace_once(std::string text, std::string_view slot, const std::string& payload,
                         const char* what) {
    auto pos = text.find(slot);
    if (pos == std::string::npos) {
        throw TemplateError(std::string("prompt template is missing the ") + what + " slot");
    }
    // The slot's "..." line becomes the payload (trailing newline dropped so
    // the closing fence stays adjacent).
    std::string body = util::rtrim(payload);
    std::string replacement = std::string(slot.substr(0, slot.find("...")));
    replacement += body;
    replacement += slot.substr(slot.find("...") + 3);
    text.replace(pos, slot.size(), replacement);
    return text;
}

std::string apply_arch_wording(std::string text, const ArchTarget& arch) {
    if (arch.name == ArchName::x86_64) {
        return text;
    }
    text = replace_all(std::move(text), "x86_64", "aarch64");
    text = replace_all(std::move(text), "(using AT&T format)",
                       "(using standard GNU assembler syntax)");
    return text;
}

std::string stage_sentence(const FailureDiagnostics& diag) {
    switch (diag.stage) {
        case FailureStage::assemble:
            return "The assembler rejected the listing.";
        case FailureStage::link:
            return "Linking the assembled object failed.";
        case FailureStage::run_crash:
            return "The program crashed at runtime.";
        case FailureStage::run_timeout:
            return "The program did not finish: the timeout duration was exceeded.";
        case FailureStage::wrong_output:
            return "The program ran but its output differs from the reference.";
        case FailureStage::extract:
            return "No assembly block was found in the previous response.";
    }
    return {};
}

}  // namespace

bool has_ir_placeholder(const std::string& prompt_text) {
    return prompt_text.find(kIrSlot) != std::string::npos;
}

std::vector<ChatMessage> render_generation_prompt(const std::string& prompt_text,
                                                  const std::string& ir_text,
                                                  const ArchTarget& arch) {
    if (ir_text.empty()) {
        throw TemplateError("cannot render a generation prompt for empty IR");
    }
    if (!has_ir_placeholder(prompt_text)) {
        throw TemplateError("prompt template is missing the llvm ir slot");
    }
    std::string body = apply_arch_wording(prompt_text, arch);
    body = replace_once(std::move(body), kIrSlot, ir_text, "llvm ir");
    return {ChatMessage{ChatRole::user, std::move(body)}};
}

ChatMessage make_debug_message(const FailureDiagnostics& diagnostics) {
    std::ostringstream out;
    out << "The previous assembly failed verification at stage: " << to_string(diagnostics.stage)
        << ".\n";
    out << stage_sentence(diagnostics) << "\n\n";
    if (!diagnostics.excerpt.empty()) {
        out << "--- diagnostics ---\n"
            << util::elide_middle(diagnostics.excerpt, kDiagnosticExcerptCap)
            << "\n-------------------\n\n";
    }
    out << "Return the corrected, complete assembly listing. " << kOutputTemplate;
    return ChatMessage{ChatRole::user, out.str()};
}

std::vector<ChatMessage> render_debug_prompt(const std::vector<ChatMessage>& prior,
                                             const FailureDiagnostics& diagnostics) {
    bool has_assistant = false;
    for (const auto& m : prior) {
        if (m.role == ChatRole::assistant) has_assistant = true;
    }
    if (!has_assistant) {
        throw ValidationError("debug prompt requires at least one prior attempt");
    }
    std::vector<ChatMessage> messages = prior;
    messages.push_back(make_debug_message(diagnostics));
    return messages;
}

std::vector<ChatMessage> render_optimization_prompt(const std::string& prompt_text,
                                                    const TaskSpec& task,
                                                    const ArchTarget& arch,
                                                    const std::string& current_asm) {
    if (current_asm.empty()) {
        throw TemplateError("cannot render an optimization prompt without a current listing");
    }
    if (!has_ir_placeholder(prompt_text)) {
        throw TemplateError("prompt template is missing the llvm ir slot");
    }
    std::string body = apply_arch_wording(prompt_text, arch);
    body = replace_once(std::move(body), kIrSlot, task.ir_text, "llvm ir");
    body = replace_once(std::move(body), kAsmSlot, current_asm, "assembly");

    std::ostringstream out;
    out << body << "\n\n"
        << "The assembly code above is a verified-correct translation of the given IR code. "
        << "Rewrite it so that it runs faster on the same architecture while remaining "
        << "functionally identical (same observable output for every input). "
        << kOutputTemplate;
    return {ChatMessage{ChatRole::user, out.str()}};
}

std::string extract_assembly(const std::string& response_content) {
    const auto lines = util::split_lines(response_content);
    std::vector<std::pair<std::size_t, std::size_t>> blocks;  // [first, last) body lines
    std::optional<std::size_t> open;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string stripped = util::rtrim(lines[i]);
        if (!open) {
            if (stripped == "```assembly") open = i + 1;
        } else if (stripped == "```") {
            blocks.emplace_back(*open, i);
            open.reset();
        }
    }
    if (blocks.empty()) {
        throw NoAssemblyBlock("response contains no fenced assembly block");
    }

    auto [first, last] = blocks.back();
    while (first < last && util::trim(lines[first]).empty()) ++first;
    while (last > first && util::trim(lines[last - 1]).empty()) --last;

    std::string out;
    for (std::size_t i = first; i < last; ++i) {
        if (i != first) out.push_back('\n');
        out += lines[i];
    }
    return out;
}

}  // namespace irasm
