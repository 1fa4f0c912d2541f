#include "protocheck/schema_parse.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <json.hpp>

namespace protocheck {

using nlohmann::json;

std::string to_string(Grounding g) {
    switch (g) {
        case Grounding::exact: return "exact";
        case Grounding::fuzzy: return "fuzzy";
        case Grounding::ungrounded: return "ungrounded";
        case Grounding::not_applicable: return "not_applicable";
    }
    return "not_applicable";
}

std::string to_string(RejectionReason r) {
    switch (r) {
        case RejectionReason::NoJsonFound: return "NoJsonFound";
        case RejectionReason::SchemaMismatch: return "SchemaMismatch";
        case RejectionReason::TypeError: return "TypeError";
        case RejectionReason::ContradictoryFields: return "ContradictoryFields";
    }
    return "NoJsonFound";
}

namespace {

std::string trim(const std::string& s) {
    std::size_t begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return {};
    std::size_t end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::string ascii_lower(std::string s) {
    for (char& c : s)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return s;
}

bool evidence_present(const json& obj) {
    return obj.contains("evidence") && obj["evidence"].is_string() &&
           !obj["evidence"].get<std::string>().empty();
}

bool index_in_digest(int index, const std::vector<DigestEntry>& digest) {
    return std::any_of(digest.begin(), digest.end(),
                       [&](const DigestEntry& e) { return e.source_index == index; });
}

/// Shared tail validation. The strict path additionally rejects unknown
/// keys before calling this; the repair path has already dropped them.
ParseResult validate_object(const json& obj, const std::vector<DigestEntry>& digest,
                            const std::string& item_id, const std::string& raw_text,
                            std::vector<std::string> repair_applied) {
    auto reject = [&](RejectionReason reason) {
        return ParseResult(ParseRejection{item_id, reason, raw_text});
    };

    for (const auto& [key, _] : obj.items())
        if (key != "is_completed" && key != "index" && key != "evidence")
            return reject(RejectionReason::SchemaMismatch);
    if (!obj.contains("is_completed")) return reject(RejectionReason::SchemaMismatch);
    if (!obj["is_completed"].is_boolean()) return reject(RejectionReason::TypeError);
    if (obj.contains("index") && !obj["index"].is_number_integer())
        return reject(RejectionReason::TypeError);
    if (obj.contains("evidence") && !obj["evidence"].is_string())
        return reject(RejectionReason::TypeError);

    ComplianceJudgment judgment;
    judgment.item_id = item_id;
    judgment.is_completed = obj["is_completed"].get<bool>();
    if (obj.contains("index")) judgment.index = obj["index"].get<int>();
    if (evidence_present(obj)) judgment.evidence = obj["evidence"].get<std::string>();

    if (judgment.is_completed && !judgment.evidence)
        return reject(RejectionReason::ContradictoryFields);
    if (judgment.index && !index_in_digest(*judgment.index, digest))
        return reject(RejectionReason::ContradictoryFields);

    judgment.repair_applied = std::move(repair_applied);
    return judgment;
}

/// Content of the first ``` fence pair when the text starts with one.
std::optional<std::string> strip_fences(const std::string& text) {
    if (text.compare(0, 3, "```") != 0) return std::nullopt;
    std::size_t body = text.find('\n', 3);  // skip optional language tag
    if (body == std::string::npos) return std::nullopt;
    ++body;
    std::size_t close = text.find("```", body);
    if (close == std::string::npos) return std::nullopt;
    return text.substr(body, close - body);
}

/// First brace-balanced {...} region, ignoring braces inside double-quoted
/// strings.
std::optional<std::string> first_balanced_object(const std::string& text) {
    std::size_t start = text.find('{');
    if (start == std::string::npos) return std::nullopt;
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (c == '\\')
                ++i;
            else if (c == '"')
                in_string = false;
        } else if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) return text.substr(start, i - start + 1);
        }
    }
    return std::nullopt;
}

const std::set<std::string> kTrueWords = {"True", "true", "yes", "Yes"};
const std::set<std::string> kFalseWords = {"False", "false", "no", "No"};

std::optional<int> parse_full_int(const std::string& s) {
    if (s.empty()) return std::nullopt;
    std::size_t i = s[0] == '-' ? 1 : 0;
    if (i == s.size()) return std::nullopt;
    for (std::size_t k = i; k < s.size(); ++k)
        if (!std::isdigit(static_cast<unsigned char>(s[k]))) return std::nullopt;
    try {
        return std::stoi(s);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

}  // namespace

ParseResult parse_strict(const RawCompletion& raw, const std::vector<DigestEntry>& digest) {
    std::string text = trim(raw.text);
    json obj = json::parse(text, nullptr, false);
    if (obj.is_discarded() || !obj.is_object())
        return ParseRejection{raw.item_id, RejectionReason::NoJsonFound, raw.text};
    return validate_object(obj, digest, raw.item_id, raw.text, {});
}

ParseResult repair_and_parse(const RawCompletion& raw, const std::vector<DigestEntry>& digest) {
    std::vector<std::string> tags;
    std::string text = trim(raw.text);

    // (1) markdown code fences
    if (auto inner = strip_fences(text)) {
        text = trim(*inner);
        tags.push_back("fences");
    }

    // (2) first balanced {...} region
    auto region = first_balanced_object(text);
    if (!region) return ParseRejection{raw.item_id, RejectionReason::NoJsonFound, raw.text};
    if (*region != text) {
        text = *region;
        tags.push_back("extract_balanced");
    }

    json obj = json::parse(text, nullptr, false);
    if (obj.is_discarded() || !obj.is_object())
        return ParseRejection{raw.item_id, RejectionReason::NoJsonFound, raw.text};

    // (3) case-fold key aliases
    {
        json folded = json::object();
        bool renamed = false;
        for (const auto& [key, value] : obj.items()) {
            std::string lower = ascii_lower(key);
            std::string canonical = key;
            if (lower == "is_completed" || lower == "completed")
                canonical = "is_completed";
            else if (lower == "index")
                canonical = "index";
            else if (lower == "evidence")
                canonical = "evidence";
            if (folded.contains(canonical)) continue;  // first occurrence wins
            if (canonical != key) renamed = true;
            folded[canonical] = value;
        }
        if (renamed) {
            obj = std::move(folded);
            tags.push_back("key_alias");
        }
    }

    // (4) boolean coercion for is_completed
    if (obj.contains("is_completed")) {
        const json& v = obj["is_completed"];
        std::optional<bool> coerced;
        if (v.is_string()) {
            if (kTrueWords.count(v.get<std::string>())) coerced = true;
            if (kFalseWords.count(v.get<std::string>())) coerced = false;
        } else if (v.is_number_integer()) {
            long n = v.get<long>();
            if (n == 1) coerced = true;
            if (n == 0) coerced = false;
        }
        if (coerced) {
            obj["is_completed"] = *coerced;
            tags.push_back("bool_coerce");
        }
    }

    // (5) numeric-string coercion for index
    if (obj.contains("index") && obj["index"].is_string()) {
        if (auto n = parse_full_int(obj["index"].get<std::string>())) {
            obj["index"] = *n;
            tags.push_back("int_coerce");
        }
    }

    // (6) drop unknown keys
    {
        std::vector<std::string> doomed;
        for (const auto& [key, _] : obj.items())
            if (key != "is_completed" && key != "index" && key != "evidence")
                doomed.push_back(key);
        if (!doomed.empty()) {
            for (const auto& key : doomed) obj.erase(key);
            tags.push_back("drop_unknown");
        }
    }

    // (7) infer a positive verdict from evidence alone
    if (!obj.contains("is_completed") && evidence_present(obj)) {
        obj["is_completed"] = true;
        tags.push_back("infer_completed");
    }

    return validate_object(obj, digest, raw.item_id, raw.text, std::move(tags));
}

std::string normalize_for_grounding(const std::string& text) {
    std::string collapsed;
    bool pending_space = false;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !collapsed.empty();
            continue;
        }
        if (pending_space) {
            collapsed.push_back(' ');
            pending_space = false;
        }
        collapsed.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
    }
    std::size_t begin = 0, end = collapsed.size();
    while (begin < end && std::ispunct(static_cast<unsigned char>(collapsed[begin]))) ++begin;
    while (end > begin && std::ispunct(static_cast<unsigned char>(collapsed[end - 1]))) --end;
    return collapsed.substr(begin, end - begin);
}

namespace {

std::set<std::string> token_set(const std::string& normalized) {
    std::set<std::string> tokens;
    std::size_t pos = 0;
    while (pos < normalized.size()) {
        std::size_t space = normalized.find(' ', pos);
        if (space == std::string::npos) space = normalized.size();
        std::string tok = normalize_for_grounding(normalized.substr(pos, space - pos));
        if (!tok.empty()) tokens.insert(std::move(tok));
        pos = space + 1;
    }
    return tokens;
}

}  // namespace

ComplianceJudgment ground_evidence(ComplianceJudgment judgment,
                                   const std::vector<DigestEntry>& digest, double fuzzy_overlap) {
    if (!judgment.is_completed || !judgment.evidence) return judgment;

    const std::string evidence = normalize_for_grounding(*judgment.evidence);

    if (judgment.index) {
        for (const auto& entry : digest) {
            if (entry.source_index != *judgment.index) continue;
            if (!evidence.empty() &&
                normalize_for_grounding(entry.text).find(evidence) != std::string::npos) {
                judgment.grounded = Grounding::exact;
                return judgment;
            }
        }
    }

    std::set<std::string> ev_tokens = token_set(evidence);
    for (const auto& entry : digest) {
        std::string norm = normalize_for_grounding(entry.text);
        if (!evidence.empty() && norm.find(evidence) != std::string::npos) {
            judgment.grounded = Grounding::fuzzy;
            return judgment;
        }
        if (!ev_tokens.empty()) {
            std::set<std::string> ut_tokens = token_set(norm);
            std::size_t shared = 0;
            for (const auto& tok : ev_tokens) shared += ut_tokens.count(tok);
            if (static_cast<double>(shared) / static_cast<double>(ev_tokens.size()) >=
                fuzzy_overlap) {
                judgment.grounded = Grounding::fuzzy;
                return judgment;
            }
        }
    }

    judgment.grounded = Grounding::ungrounded;
    return judgment;
}

}  // namespace protocheck
