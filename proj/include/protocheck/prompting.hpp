#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "protocheck/context.hpp"
#include "protocheck/corpus.hpp"

namespace protocheck {

/// Per-scenario prompt pieces. schema_instructions must mention each of
/// the output keys is_completed / index / evidence exactly once.
struct PromptTemplate {
    std::string scenario_id;
    std::string task_intro;
    std::string schema_instructions;
};

struct DigestEntry {
    int source_index = 0;
    std::string text;

    bool operator==(const DigestEntry&) const = default;
};

struct PromptBundle {
    std::string item_id;
    std::string rendered_text;
    std::vector<DigestEntry> context_digest;
    int token_estimate = 0;
};

enum class PromptErrorCode { TemplateSlotMissing, ContextEmpty };

class PromptError : public std::runtime_error {
public:
    PromptError(PromptErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    PromptErrorCode code() const { return code_; }

private:
    PromptErrorCode code_;
};

/// ceil(len/4); a deliberate upper-bound proxy used only for budget warnings.
int estimate_tokens(const std::string& text);

/// Renders the three sections (Task Introduction, Scenario Context, Target
/// Checklist Item) in order. Context entries appear as
/// {index: N, transcript: "..."} in transcript order, with the text
/// JSON-escaped so braces or schema keywords inside utterances cannot
/// perturb the structure. Byte-identical output for identical inputs.
PromptBundle render_prompt(const ContextSelection& selection, const ChecklistItem& item,
                           const PromptTemplate& tmpl);

/// Inverse of the Scenario Context rendering; recovers the digest entries
/// from rendered prompt text.
std::vector<DigestEntry> parse_scenario_context(const std::string& rendered_text);

/// Loads the per-scenario intro phrase table. The file carries a shared
/// task_intro_template containing the literal slot {scenario_purpose},
/// shared schema_instructions, and a scenarios map of id -> purpose phrase.
std::map<std::string, PromptTemplate> load_prompt_templates(const std::string& path);

}  // namespace protocheck
