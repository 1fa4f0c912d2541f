#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "protocheck/llm_client.hpp"
#include "protocheck/prompting.hpp"

namespace protocheck {

enum class Grounding { exact, fuzzy, ungrounded, not_applicable };

std::string to_string(Grounding g);

/// A schema-validated verdict. repair_applied records, in order, the
/// repair steps that actually changed something ("fences",
/// "extract_balanced", "key_alias", "bool_coerce", "int_coerce",
/// "drop_unknown", "infer_completed"); empty for strict parses.
struct ComplianceJudgment {
    std::string item_id;
    bool is_completed = false;
    std::optional<int> index;           // source_index of the cited utterance
    std::optional<std::string> evidence;  // verbatim transcript quote
    std::vector<std::string> repair_applied;
    Grounding grounded = Grounding::not_applicable;

    bool operator==(const ComplianceJudgment&) const = default;
};

enum class RejectionReason { NoJsonFound, SchemaMismatch, TypeError, ContradictoryFields };

std::string to_string(RejectionReason r);

struct ParseRejection {
    std::string item_id;
    RejectionReason reason = RejectionReason::NoJsonFound;
    std::string raw_text;
};

using ParseResult = std::variant<ComplianceJudgment, ParseRejection>;

/// Accepts iff raw.text is exactly one JSON object carrying is_completed
/// (boolean), optional integer index, optional string evidence and nothing
/// else, with cross-field invariants intact: a true verdict needs evidence,
/// and a cited index must occur in the prompt digest.
ParseResult parse_strict(const RawCompletion& raw, const std::vector<DigestEntry>& digest);

/// Fallback ladder for near-miss outputs, applied in a fixed order (see
/// ComplianceJudgment::repair_applied), then strict validation again.
/// Deterministic: identical text yields identical judgment and tags.
ParseResult repair_and_parse(const RawCompletion& raw, const std::vector<DigestEntry>& digest);

/// Classifies the cited evidence of a positive judgment against the digest:
/// exact when the normalized quote occurs in the utterance with the cited
/// index, fuzzy when it occurs in any digest utterance or shares at least
/// `fuzzy_overlap` of its tokens with one, ungrounded otherwise.
ComplianceJudgment ground_evidence(ComplianceJudgment judgment,
                                   const std::vector<DigestEntry>& digest,
                                   double fuzzy_overlap = 0.6);

/// Case-folds, collapses whitespace, strips surrounding punctuation.
std::string normalize_for_grounding(const std::string& text);

}  // namespace protocheck
