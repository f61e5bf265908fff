#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "irasm/gateway.hpp"
#include "irasm/pipeline.hpp"

namespace irasm {

enum class EditKind { add_rule, modify_rule, remove_rule };

// One discrete, section-anchored patch against the prompt's rule block.
// For modify/remove the anchor is "<section> / <exact current rule text>";
// for add it is the bare section title (created on demand).
struct EditProposal {
    EditKind kind = EditKind::add_rule;
    std::string anchor;
    std::string content;      // new rule text (empty for remove)
    std::string rationale;
    bool confirmed = false;
};

struct PromptVersion {
    std::string version_id;               // sha256 of text (content addressed)
    std::optional<std::string> parent_id; // absent only for the root
    std::string text;
    int created_epoch = 0;
    int created_batch = 0;
    std::vector<EditProposal> changelog;  // proposals reviewed for this version
    std::optional<double> validation_score;
};

const char* to_string(EditKind kind);
EditKind parse_edit_kind(const std::string& text);

// --- prompt text surgery -------------------------------------------------

// Applies the confirmed subset of `reviewed` to `text`. Throws AnchorError
// when a modify/remove names a rule that is not present.
std::string apply_confirmed_edits(const std::string& text,
                                  const std::vector<EditProposal>& reviewed);

// --- version store --------------------------------------------------------

class PromptStore {
public:
    // Fresh store rooted at the baseline prompt. The baseline must carry the
    // mandatory fenced-output instruction.
    static PromptStore init(const std::string& baseline_text);
    static PromptStore load(const std::filesystem::path& dir);
    void save(const std::filesystem::path& dir) const;

    const PromptVersion& root() const { return versions_.front(); }
    const std::vector<PromptVersion>& versions() const { return versions_; }
    const PromptVersion& at(const std::string& version_id) const;
    bool contains(const std::string& version_id) const;
    void set_validation_score(const std::string& version_id, double score);

    // Creates the child of `parent` by applying the confirmed edits in
    // `reviewed`; returns the existing version when the result's content
    // hash is already present.
    const PromptVersion& derive(const std::string& parent_id,
                                std::vector<EditProposal> reviewed, int epoch, int batch);

    // Recomputes every non-root version from its parent text and changelog;
    // throws ValidationError on any byte mismatch (lineage corruption).
    void verify_lineage() const;

private:
    std::vector<PromptVersion> versions_;  // creation order, root first
    std::map<std::string, std::size_t> index_;
};

PromptVersion init_prompt_store(const std::string& baseline_text);

// --- learning signal -------------------------------------------------------

struct LearningBatchSignal {
    std::vector<std::string> batch_tasks;
    std::vector<SelfDebugTrace> trajectories;   // resolved && rounds_used >= 1 only
    std::string token_budgeted_excerpts;

    bool empty() const { return trajectories.empty(); }
};

// Filters the batch outcomes down to generation traces that were initially
// wrong but self-debugged to correct, and renders them under the token
// budget (approximated as 4 chars/token), dropping oldest attempts first.
LearningBatchSignal collect_signal(const std::vector<TaskOutcome>& outcomes,
                                   const std::vector<std::string>& batch,
                                   std::size_t budget_tokens);

// --- optimizer calls -------------------------------------------------------

struct MetaTemplates {
    std::string propose;   // slots: {{CURRENT_PROMPT}}, {{TRAJECTORIES}}
    std::string confirm;   // slots: {{CURRENT_PROMPT}}, {{PROPOSALS}}
};

// Response grammar for proposals (EDIT ... END blocks). Unparseable blocks
// are dropped with a warning; zero parsed from a non-empty response is a
// MetaFormatError.
std::vector<EditProposal> parse_edit_proposals(const std::string& response,
                                               std::vector<std::string>* warnings);

std::string render_proposal_list(const std::vector<EditProposal>& proposals);

// Review decisions: "ACCEPT n" / "REJECT n" lines. Throws MetaFormatError
// when no decision parses; proposals without a decision stay rejected.
std::vector<EditProposal> parse_review_decisions(const std::string& response,
                                                 std::vector<EditProposal> proposals);

std::vector<EditProposal> propose_edits(const PromptVersion& current,
                                        const LearningBatchSignal& signal, Gateway& gateway,
                                        const ModelOptions& model, const MetaTemplates& templates,
                                        const std::string& conversation_id,
                                        std::vector<std::string>* warnings);

std::vector<EditProposal> confirm_edits(const PromptVersion& current,
                                        const std::vector<EditProposal>& proposals,
                                        Gateway& gateway, const ModelOptions& model,
                                        const MetaTemplates& templates,
                                        const std::string& conversation_id);

// --- the offline loop ------------------------------------------------------

struct LearnParams {
    int epochs = 3;
    int batch_size = 5;
    std::size_t token_budget = 8000;
};

struct LearnDeps {
    // Generation + self-debug only (optimization is not part of offline learning).
    std::function<TaskOutcome(const std::string& task_id, const PromptVersion& prompt,
                              int epoch, int batch)>
        compile;
    // Validation metric for one prompt over the validation split (ACC
    // fraction); epoch identifies the scoring pass for replay bookkeeping.
    std::function<double(const std::vector<std::string>& task_ids, const PromptVersion& prompt,
                         int epoch)>
        validate;
    std::function<std::vector<EditProposal>(const PromptVersion&, const LearningBatchSignal&,
                                            int epoch, int batch)>
        propose;
    std::function<std::vector<EditProposal>(const PromptVersion&,
                                            const std::vector<EditProposal>&, int epoch,
                                            int batch)>
        confirm;
    std::function<void(const std::string&)> warn = [](const std::string&) {};
    // Called after every completed batch with (epoch, batch, current id);
    // persists the checkpoint + store so interrupted runs resume exactly.
    std::function<void(int, int, const std::string&)> checkpoint = [](int, int,
                                                                      const std::string&) {};
};

struct LearnResult {
    std::string selected_id;
    std::string current_id;   // π after the last batch
};

// Mini-batch learning: per batch run the compile stage with the current
// prompt, harvest the signal, propose + confirm + apply edits; per epoch,
// score unscored versions on the validation split; finally select the
// argmax-score version (ties go to the most recently created).
LearnResult learn(PromptStore& store, const std::vector<std::string>& train,
                  const std::vector<std::string>& validation, const LearnParams& params,
                  const LearnDeps& deps, int resume_epoch = 0, int resume_batch = 0,
                  const std::string& resume_current = {});

const PromptVersion& select_best(const PromptStore& store);

}  // namespace irasm
