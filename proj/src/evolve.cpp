#include "irasm/evolve.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

#include "irasm/errors.hpp"
#include "irasm/prompts.hpp"
#include "irasm/util.hpp"

namespace irasm {

namespace {

using nlohmann::json;

constexpr const char* kRulesPreamble =
    "3. Additionally, to guarantee the correctness of the generated assembly code, please "
    "ensure that:";
constexpr const char* kSectionIndent = "    - ";
constexpr const char* kRuleIndent = "        * ";
constexpr const char* kMandatoryInstruction = "You MUST use the following template";

bool is_section_line(const std::string& line) {
    return line.rfind(kSectionIndent, 0) == 0 && !line.empty() && line.back() == ':';
}

bool is_rule_line(const std::string& line) {
    return line.rfind(kRuleIndent, 0) == 0;
}

std::string section_line_for(const std::string& title) {
    return std::string(kSectionIndent) + title + ":";
}

std::string rule_line_for(const std::string& text) {
    return std::string(kRuleIndent) + text;
}

// anchor for modify/remove: "<section> / <rule text>"
std::pair<std::string, std::string> split_anchor(const std::string& anchor) {
    auto pos = anchor.find(" / ");
    if (pos == std::string::npos) {
        return {anchor, std::string()};
    }
    return {anchor.substr(0, pos), anchor.substr(pos + 3)};
}

std::size_t find_section(const std::vector<std::string>& lines, const std::string& title) {
    const std::string wanted = section_line_for(title);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i] == wanted) return i;
    }
    return lines.size();
}

void apply_one_edit(std::vector<std::string>& lines, const EditProposal& edit) {
    if (edit.kind == EditKind::add_rule) {
        bool has_preamble = false;
        for (const auto& line : lines) {
            if (line.rfind("3. Additionally,", 0) == 0) {
                has_preamble = true;
                break;
            }
        }
        if (!has_preamble) {
            lines.push_back(kRulesPreamble);
        }
        std::size_t section = find_section(lines, edit.anchor);
        if (section == lines.size()) {
            lines.push_back(section_line_for(edit.anchor));
            section = lines.size() - 1;
        }
        std::size_t insert_at = section + 1;
        while (insert_at < lines.size() && is_rule_line(lines[insert_at])) ++insert_at;
        lines.insert(lines.begin() + static_cast<std::ptrdiff_t>(insert_at),
                     rule_line_for(edit.content));
        return;
    }

    const auto [section_title, rule_text] = split_anchor(edit.anchor);
    const std::size_t section = find_section(lines, section_title);
    if (section == lines.size()) {
        throw AnchorError("edit anchor names a missing section: '" + section_title + "'");
    }
    const std::string wanted = rule_line_for(rule_text);
    for (std::size_t i = section + 1; i < lines.size() && is_rule_line(lines[i]); ++i) {
        if (lines[i] == wanted) {
            if (edit.kind == EditKind::modify_rule) {
                lines[i] = rule_line_for(edit.content);
            } else {
                lines.erase(lines.begin() + static_cast<std::ptrdiff_t>(i));
            }
            return;
        }
    }
    throw AnchorError("edit anchor names a missing rule under '" + section_title + "': '" +
                      rule_text + "'");
}

}  // namespace

const char* to_string(EditKind kind) {
    switch (kind) {
        case EditKind::add_rule: return "add_rule";
        case EditKind::modify_rule: return "modify_rule";
        case EditKind::remove_rule: return "remove_rule";
    }
    return "add_rule";
}

EditKind parse_edit_kind(const std::string& text) {
    if (text == "add_rule") return EditKind::add_rule;
    if (text == "modify_rule") return EditKind::modify_rule;
    if (text == "remove_rule") return EditKind::remove_rule;
    throw ParseError("unknown edit kind '" + text + "'");
}

std::string apply_confirmed_edits(const std::string& text,
                                  const std::vector<EditProposal>& reviewed) {
    const bool had_trailing_newline = !text.empty() && text.back() == '\n';
    std::vector<std::string> lines = util::split_lines(text);
    for (const auto& edit : reviewed) {
        if (!edit.confirmed) continue;
        apply_one_edit(lines, edit);
    }
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i) out.push_back('\n');
        out += lines[i];
    }
    if (had_trailing_newline) out.push_back('\n');
    return out;
}

PromptStore PromptStore::init(const std::string& baseline_text) {
    PromptStore store;
    PromptVersion root;
    root.version_id = util::sha256_hex(baseline_text);
    root.text = baseline_text;
    if (baseline_text.find(kMandatoryInstruction) == std::string::npos) {
        throw TemplateError("baseline prompt lacks the mandatory output-template instruction");
    }
    if (!has_ir_placeholder(baseline_text)) {
        throw TemplateError("baseline prompt lacks the llvm ir placeholder slot");
    }
    store.index_[root.version_id] = 0;
    store.versions_.push_back(std::move(root));
    return store;
}

PromptVersion init_prompt_store(const std::string& baseline_text) {
    return PromptStore::init(baseline_text).root();
}

const PromptVersion& PromptStore::at(const std::string& version_id) const {
    auto it = index_.find(version_id);
    if (it == index_.end()) {
        throw ValidationError("unknown prompt version: " + version_id);
    }
    return versions_[it->second];
}

bool PromptStore::contains(const std::string& version_id) const {
    return index_.count(version_id) > 0;
}

void PromptStore::set_validation_score(const std::string& version_id, double score) {
    auto it = index_.find(version_id);
    if (it == index_.end()) {
        throw ValidationError("unknown prompt version: " + version_id);
    }
    versions_[it->second].validation_score = score;
}

const PromptVersion& PromptStore::derive(const std::string& parent_id,
                                         std::vector<EditProposal> reviewed, int epoch,
                                         int batch) {
    const PromptVersion& parent = at(parent_id);
    std::string child_text = apply_confirmed_edits(parent.text, reviewed);
    const std::string child_id = util::sha256_hex(child_text);
    if (auto it = index_.find(child_id); it != index_.end()) {
        return versions_[it->second];  // edits were a no-op content-wise
    }
    PromptVersion child;
    child.version_id = child_id;
    child.parent_id = parent_id;
    child.text = std::move(child_text);
    child.created_epoch = epoch;
    child.created_batch = batch;
    child.changelog = std::move(reviewed);
    index_[child.version_id] = versions_.size();
    versions_.push_back(std::move(child));
    return versions_.back();
}

void PromptStore::verify_lineage() const {
    for (std::size_t i = 0; i < versions_.size(); ++i) {
        const PromptVersion& v = versions_[i];
        if (i == 0) {
            if (v.parent_id) {
                throw ValidationError("root version has a parent");
            }
            continue;
        }
        if (!v.parent_id) {
            throw ValidationError("non-root version lacks a parent: " + v.version_id);
        }
        const PromptVersion& parent = at(*v.parent_id);
        const std::string replayed = apply_confirmed_edits(parent.text, v.changelog);
        if (replayed != v.text) {
            throw ValidationError("lineage replay mismatch for version " + v.version_id);
        }
        if (util::sha256_hex(v.text) != v.version_id) {
            throw ValidationError("content hash mismatch for version " + v.version_id);
        }
    }
}

void PromptStore::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir / "versions");
    json lineage;
    lineage["schema"] = "irasm-prompt-store/1";
    json list = json::array();
    for (const auto& v : versions_) {
        util::write_file(dir / "versions" / (v.version_id + ".txt"), v.text);
        json entry;
        entry["version_id"] = v.version_id;
        if (v.parent_id) entry["parent_id"] = *v.parent_id;
        entry["created_epoch"] = v.created_epoch;
        entry["created_batch"] = v.created_batch;
        if (v.validation_score) entry["validation_score"] = *v.validation_score;
        json changelog = json::array();
        for (const auto& e : v.changelog) {
            changelog.push_back({{"kind", to_string(e.kind)},
                                 {"anchor", e.anchor},
                                 {"content", e.content},
                                 {"rationale", e.rationale},
                                 {"confirmed", e.confirmed}});
        }
        entry["changelog"] = std::move(changelog);
        list.push_back(std::move(entry));
    }
    lineage["versions"] = std::move(list);
    util::write_file_atomic(dir / "lineage.json", lineage.dump(2) + "\n");
}

PromptStore PromptStore::load(const std::filesystem::path& dir) {
    json lineage;
    try {
        lineage = json::parse(util::read_file(dir / "lineage.json"));
    } catch (const json::exception& ex) {
        throw ParseError("prompt store lineage: " + std::string(ex.what()));
    }
    PromptStore store;
    for (const auto& entry : lineage.at("versions")) {
        PromptVersion v;
        v.version_id = entry.at("version_id").get<std::string>();
        if (entry.contains("parent_id")) v.parent_id = entry.at("parent_id").get<std::string>();
        v.created_epoch = entry.value("created_epoch", 0);
        v.created_batch = entry.value("created_batch", 0);
        if (entry.contains("validation_score")) {
            v.validation_score = entry.at("validation_score").get<double>();
        }
        for (const auto& e : entry.value("changelog", json::array())) {
            EditProposal p;
            p.kind = parse_edit_kind(e.at("kind").get<std::string>());
            p.anchor = e.at("anchor").get<std::string>();
            p.content = e.value("content", std::string());
            p.rationale = e.value("rationale", std::string());
            p.confirmed = e.value("confirmed", false);
            v.changelog.push_back(std::move(p));
        }
        v.text = util::read_file(dir / "versions" / (v.version_id + ".txt"));
        store.index_[v.version_id] = store.versions_.size();
        store.versions_.push_back(std::move(v));
    }
    if (store.versions_.empty()) {
        throw ValidationError("prompt store has no versions");
    }
    store.verify_lineage();
    return store;
}

LearningBatchSignal collect_signal(const std::vector<TaskOutcome>& outcomes,
                                   const std::vector<std::string>& batch,
                                   std::size_t budget_tokens) {
    LearningBatchSignal signal;
    signal.batch_tasks = batch;
    for (const auto& id : batch) {
        const TaskOutcome* outcome = nullptr;
        for (const auto& o : outcomes) {
            if (o.task_id == id) {
                outcome = &o;
                break;
            }
        }
        if (outcome == nullptr) {
            throw ValidationError("no outcome recorded for batch task '" + id + "'");
        }
        const SelfDebugTrace& trace = outcome->generation_trace;
        if (trace.resolved && trace.rounds_used >= 1) {
            signal.trajectories.push_back(trace);
        }
    }
    if (signal.trajectories.empty()) {
        return signal;
    }

    // One removable block per failed attempt, one fixed block per final
    // correct listing; over budget, the oldest attempts go first.
    struct Block {
        std::string text;
        bool removable;
    };
    std::vector<Block> blocks;
    for (const auto& trace : signal.trajectories) {
        std::ostringstream head;
        head << "## task " << trace.task_id << ": corrected after " << trace.rounds_used
             << " self-debug round(s)\n";
        blocks.push_back({head.str(), false});
        for (std::size_t i = 0; i + 1 < trace.attempts.size(); ++i) {
            const Attempt& a = trace.attempts[i];
            std::ostringstream out;
            out << "### attempt " << a.index << " [" << to_string(a.verdict.status) << "]\n";
            out << "```assembly\n"
                << (a.asm_text ? util::elide_middle(*a.asm_text, 4096)
                               : std::string("(no assembly block)"))
                << "\n```\n";
            if (a.verdict.diagnostics) {
                out << "diagnostics:\n"
                    << util::elide_middle(a.verdict.diagnostics->excerpt, 2048) << "\n";
            }
            out << "\n";
            blocks.push_back({out.str(), true});
        }
        std::ostringstream fin;
        fin << "### final correct listing\n```assembly\n"
            << util::elide_middle(*trace.attempts.back().asm_text, 4096) << "\n```\n\n";
        blocks.push_back({fin.str(), false});
    }

    const std::size_t budget_chars = budget_tokens * 4;
    auto total = [&]() {
        std::size_t n = 0;
        for (const auto& b : blocks) n += b.text.size();
        return n;
    };
    for (auto& block : blocks) {
        if (total() <= budget_chars) break;
        if (block.removable) {
            block.text = "### (older attempt elided for budget)\n\n";
            block.removable = false;
        }
    }

    std::string rendered;
    for (const auto& b : blocks) rendered += b.text;
    signal.token_budgeted_excerpts = std::move(rendered);
    return signal;
}

std::vector<EditProposal> parse_edit_proposals(const std::string& response,
                                               std::vector<std::string>* warnings) {
    std::vector<EditProposal> proposals;
    std::map<std::string, std::string> fields;
    bool in_block = false;

    auto warn = [&](const std::string& msg) {
        if (warnings) warnings->push_back(msg);
    };

    auto finish_block = [&]() {
        EditProposal p;
        try {
            p.kind = parse_edit_kind(fields.count("kind") ? fields["kind"] : "");
        } catch (const ParseError&) {
            warn("dropped edit block with missing/unknown kind");
            return;
        }
        const std::string section = fields.count("section") ? fields["section"] : "";
        const std::string rule = fields.count("rule") ? fields["rule"] : "";
        p.content = fields.count("content") ? fields["content"] : "";
        p.rationale = fields.count("rationale") ? fields["rationale"] : "";
        if (section.empty()) {
            warn("dropped edit block without a section");
            return;
        }
        switch (p.kind) {
            case EditKind::add_rule:
                if (p.content.empty()) {
                    warn("dropped add_rule without content");
                    return;
                }
                p.anchor = section;
                break;
            case EditKind::modify_rule:
                if (rule.empty() || p.content.empty()) {
                    warn("dropped modify_rule without rule/content");
                    return;
                }
                p.anchor = section + " / " + rule;
                break;
            case EditKind::remove_rule:
                if (rule.empty()) {
                    warn("dropped remove_rule without rule");
                    return;
                }
                p.anchor = section + " / " + rule;
                p.content.clear();
                break;
        }
        proposals.push_back(std::move(p));
    };

    for (const auto& raw : util::split_lines(response)) {
        const std::string line = util::trim(raw);
        if (!in_block) {
            if (line == "EDIT" || line.rfind("EDIT ", 0) == 0) {
                in_block = true;
                fields.clear();
            }
            continue;
        }
        if (line == "END") {
            finish_block();
            in_block = false;
            continue;
        }
        auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        fields[util::trim(line.substr(0, colon))] = util::trim(line.substr(colon + 1));
    }

    if (proposals.empty() && !util::trim(response).empty()) {
        throw MetaFormatError("optimizer response contained no parseable edits");
    }
    return proposals;
}

std::string render_proposal_list(const std::vector<EditProposal>& proposals) {
    std::ostringstream out;
    for (std::size_t i = 0; i < proposals.size(); ++i) {
        const EditProposal& p = proposals[i];
        out << (i + 1) << ". " << to_string(p.kind) << " [" << p.anchor << "]";
        if (!p.content.empty()) out << " -> " << p.content;
        out << "\n   rationale: " << (p.rationale.empty() ? "(none)" : p.rationale) << "\n";
    }
    return out.str();
}

std::vector<EditProposal> parse_review_decisions(const std::string& response,
                                                 std::vector<EditProposal> proposals) {
    int decisions = 0;
    for (const auto& raw : util::split_lines(response)) {
        const std::string line = util::trim(raw);
        bool accept = false;
        std::string rest;
        if (line.rfind("ACCEPT", 0) == 0) {
            accept = true;
            rest = util::trim(line.substr(6));
        } else if (line.rfind("REJECT", 0) == 0) {
            rest = util::trim(line.substr(6));
        } else {
            continue;
        }
        if (rest.empty() || rest.size() > 6 ||
            rest.find_first_not_of("0123456789") != std::string::npos) {
            continue;
        }
        const std::size_t idx = std::stoul(rest);
        if (idx == 0 || idx > proposals.size()) {
            continue;
        }
        proposals[idx - 1].confirmed = accept;
        ++decisions;
    }
    if (decisions == 0) {
        throw MetaFormatError("review response contained no ACCEPT/REJECT decisions");
    }
    return proposals;
}

namespace {

std::string fill_slots(std::string text, const std::string& slot, const std::string& value) {
    auto pos = text.find(slot);
    if (pos == std::string::npos) {
        throw TemplateError("meta template is missing the " + slot + " slot");
    }
    while (pos != std::string::npos) {
        text.replace(pos, slot.size(), value);
        pos = text.find(slot, pos + value.size());
    }
    return text;
}

ChatRequest meta_request(const ModelOptions& model, std::string body,
                         const std::string& conversation_id) {
    ChatRequest request;
    request.model = model.model;
    request.temperature = model.temperature;
    request.max_tokens = model.max_tokens;
    request.messages = {ChatMessage{ChatRole::user, std::move(body)}};
    request.conversation = conversation_id;
    return request;
}

}  // namespace

std::vector<EditProposal> propose_edits(const PromptVersion& current,
                                        const LearningBatchSignal& signal, Gateway& gateway,
                                        const ModelOptions& model, const MetaTemplates& templates,
                                        const std::string& conversation_id,
                                        std::vector<std::string>* warnings) {
    if (signal.empty()) {
        throw ValidationError("propose_edits called with an empty signal");
    }
    std::string body = fill_slots(templates.propose, "{{CURRENT_PROMPT}}", current.text);
    body = fill_slots(std::move(body), "{{TRAJECTORIES}}", signal.token_budgeted_excerpts);
    ChatResponse response = gateway.complete(meta_request(model, std::move(body), conversation_id));
    return parse_edit_proposals(response.content, warnings);
}

std::vector<EditProposal> confirm_edits(const PromptVersion& current,
                                        const std::vector<EditProposal>& proposals,
                                        Gateway& gateway, const ModelOptions& model,
                                        const MetaTemplates& templates,
                                        const std::string& conversation_id) {
    if (proposals.empty()) {
        throw ValidationError("confirm_edits called with no proposals");
    }
    std::string body = fill_slots(templates.confirm, "{{CURRENT_PROMPT}}", current.text);
    body = fill_slots(std::move(body), "{{PROPOSALS}}", render_proposal_list(proposals));
    ChatResponse response = gateway.complete(meta_request(model, std::move(body), conversation_id));
    return parse_review_decisions(response.content, proposals);
}

LearnResult learn(PromptStore& store, const std::vector<std::string>& train,
                  const std::vector<std::string>& validation, const LearnParams& params,
                  const LearnDeps& deps, int resume_epoch, int resume_batch,
                  const std::string& resume_current) {
    if (train.empty()) {
        throw ValidationError("learn requires a non-empty train split");
    }
    if (params.batch_size <= 0 || params.epochs <= 0) {
        throw ValidationError("learn requires positive epochs and batch size");
    }

    std::string current = resume_current.empty() ? store.root().version_id : resume_current;
    if (!store.contains(current)) {
        throw ValidationError("resume checkpoint names an unknown version: " + current);
    }

    const int n_batches =
        static_cast<int>((train.size() + params.batch_size - 1) / params.batch_size);

    for (int epoch = 1; epoch <= params.epochs; ++epoch) {
        for (int batch = 1; batch <= n_batches; ++batch) {
            if (epoch < resume_epoch || (epoch == resume_epoch && batch <= resume_batch)) {
                continue;
            }
            const std::size_t begin = static_cast<std::size_t>(batch - 1) *
                                      static_cast<std::size_t>(params.batch_size);
            const std::size_t end = std::min(train.size(),
                                             begin + static_cast<std::size_t>(params.batch_size));
            std::vector<std::string> batch_ids(train.begin() + begin, train.begin() + end);

            const PromptVersion& prompt = store.at(current);
            std::vector<TaskOutcome> outcomes;
            outcomes.reserve(batch_ids.size());
            for (const auto& id : batch_ids) {
                outcomes.push_back(deps.compile(id, prompt, epoch, batch));
            }

            LearningBatchSignal signal = collect_signal(outcomes, batch_ids, params.token_budget);
            if (!signal.empty()) {
                try {
                    std::vector<EditProposal> proposals =
                        deps.propose(prompt, signal, epoch, batch);
                    if (!proposals.empty()) {
                        std::vector<EditProposal> reviewed =
                            deps.confirm(prompt, proposals, epoch, batch);
                        bool any = false;
                        for (const auto& p : reviewed) any = any || p.confirmed;
                        if (any) {
                            current = store.derive(current, std::move(reviewed), epoch, batch)
                                          .version_id;
                        }
                    }
                } catch (const MetaFormatError& ex) {
                    // Conservative failure: the prompt is left untouched for
                    // this batch.
                    deps.warn(std::string("batch skipped: ") + ex.what());
                }
            }
            deps.checkpoint(epoch, batch, current);
        }

        // Epoch-end scoring pass over versions that do not have a score yet
        // (new children this epoch, plus the root on the first pass). The
        // created_epoch guard keeps resumed runs on the same schedule as
        // uninterrupted ones.
        std::vector<std::string> unscored;
        for (const auto& v : store.versions()) {
            if (!v.validation_score && v.created_epoch <= epoch) unscored.push_back(v.version_id);
        }
        for (const auto& id : unscored) {
            store.set_validation_score(id, deps.validate(validation, store.at(id), epoch));
        }
        deps.checkpoint(epoch, n_batches, current);
    }

    LearnResult result;
    result.selected_id = select_best(store).version_id;
    result.current_id = current;
    return result;
}

const PromptVersion& select_best(const PromptStore& store) {
    if (store.versions().empty()) {
        throw EmptyCandidates("no prompt versions to select from");
    }
    const PromptVersion* best = nullptr;
    for (const auto& v : store.versions()) {
        if (!v.validation_score) {
            throw ValidationError("version " + v.version_id + " has no validation score");
        }
        // >= so that ties resolve to the most recently created version.
        if (best == nullptr || *v.validation_score >= *best->validation_score) {
            best = &v;
        }
    }
    return *best;
}

}  // namespace irasm
