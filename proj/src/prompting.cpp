#include "protocheck/prompting.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace protocheck {

using nlohmann::json;

int estimate_tokens(const std::string& text) {
    return static_cast<int>((text.size() + 3) / 4);
}

namespace {

constexpr const char* kContextHeader = "Scenario Context:\n";
constexpr const char* kItemHeader = "Target Checklist Item:\n";

std::size_t count_occurrences(const std::string& haystack, const std::string& needle) {
    std::size_t count = 0;
    for (std::size_t pos = haystack.find(needle); pos != std::string::npos;
         pos = haystack.find(needle, pos + needle.size()))
        ++count;
    return count;
}

void check_template(const PromptTemplate& tmpl) {
    if (tmpl.task_intro.empty() || tmpl.task_intro.find("{scenario_purpose}") != std::string::npos)
        throw PromptError(PromptErrorCode::TemplateSlotMissing,
                          "task_intro for '" + tmpl.scenario_id + "' is empty or has an unfilled slot");
    for (const char* key : {"is_completed", "index", "evidence"})
        if (count_occurrences(tmpl.schema_instructions, key) != 1)
            throw PromptError(PromptErrorCode::TemplateSlotMissing,
                              std::string("schema_instructions must mention '") + key +
                                  "' exactly once");
}

}  // namespace

PromptBundle render_prompt(const ContextSelection& selection, const ChecklistItem& item,
                           const PromptTemplate& tmpl) {
    if (selection.item_id != item.item_id)
        throw std::invalid_argument("selection is for item '" + selection.item_id +
                                    "', not '" + item.item_id + "'");
    check_template(tmpl);
    if (selection.selected.empty())
        throw PromptError(PromptErrorCode::ContextEmpty,
                          "no context selected for item '" + item.item_id + "'");

    PromptBundle bundle;
    bundle.item_id = item.item_id;

    std::ostringstream out;
    out << "Task Introduction:\n" << tmpl.task_intro << "\n" << tmpl.schema_instructions << "\n\n";
    out << kContextHeader << "[";
    bool first = true;
    for (const auto& u : selection.selected) {
        if (!first) out << ", ";
        first = false;
        out << "{index: " << u.source_index << ", transcript: " << json(u.text).dump() << "}";
        bundle.context_digest.push_back({u.source_index, u.text});
    }
    out << "]\n\n" << kItemHeader << item.text << "\n";

    bundle.rendered_text = out.str();
    bundle.token_estimate = estimate_tokens(bundle.rendered_text);
    return bundle;
}

std::vector<DigestEntry> parse_scenario_context(const std::string& rendered_text) {
    std::size_t start = rendered_text.find(kContextHeader);
    if (start == std::string::npos)
        throw std::invalid_argument("no Scenario Context section found");
    std::size_t pos = start + std::string(kContextHeader).size();
    if (pos >= rendered_text.size() || rendered_text[pos] != '[')
        throw std::invalid_argument("Scenario Context section is not a list");
    ++pos;

    std::vector<DigestEntry> entries;
    if (pos < rendered_text.size() && rendered_text[pos] == ']') return entries;

    auto expect = [&](const std::string& literal) {
        if (rendered_text.compare(pos, literal.size(), literal) != 0)
            throw std::invalid_argument("malformed context entry at offset " + std::to_string(pos));
        pos += literal.size();
    };

    while (true) {
        expect("{index: ");
        std::size_t num_end = rendered_text.find(',', pos);
        if (num_end == std::string::npos) throw std::invalid_argument("unterminated context entry");
        DigestEntry entry;
        entry.source_index = std::stoi(rendered_text.substr(pos, num_end - pos));
        pos = num_end;
        expect(", transcript: ");
        if (pos >= rendered_text.size() || rendered_text[pos] != '"')
            throw std::invalid_argument("context transcript is not a quoted string");
        std::size_t str_start = pos;
        ++pos;
        while (pos < rendered_text.size() && rendered_text[pos] != '"') {
            if (rendered_text[pos] == '\\') ++pos;  // skip escaped char
            ++pos;
        }
        if (pos >= rendered_text.size()) throw std::invalid_argument("unterminated string");
        ++pos;  // closing quote
        entry.text = json::parse(rendered_text.substr(str_start, pos - str_start)).get<std::string>();
        entries.push_back(std::move(entry));
        expect("}");
        if (pos < rendered_text.size() && rendered_text[pos] == ']') break;
        expect(", ");
    }
    return entries;
}

std::map<std::string, PromptTemplate> load_prompt_templates(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open template fixture: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();

    json j = json::parse(buf.str(), nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("task_intro_template") ||
        !j["task_intro_template"].is_string() || !j.contains("schema_instructions") ||
        !j["schema_instructions"].is_string() || !j.contains("scenarios") ||
        !j["scenarios"].is_object())
        throw std::runtime_error("malformed template fixture: " + path);

    const std::string base = j["task_intro_template"].get<std::string>();
    const std::string slot = "{scenario_purpose}";
    std::size_t slot_pos = base.find(slot);
    if (slot_pos == std::string::npos)
        throw PromptError(PromptErrorCode::TemplateSlotMissing,
                          "task_intro_template lacks the {scenario_purpose} slot");

    std::map<std::string, PromptTemplate> out;
    for (const auto& [scenario_id, purpose] : j["scenarios"].items()) {
        if (!purpose.is_string())
            throw std::runtime_error("scenario purpose for '" + scenario_id + "' must be a string");
        PromptTemplate tmpl;
        tmpl.scenario_id = scenario_id;
        tmpl.task_intro = base;
        tmpl.task_intro.replace(slot_pos, slot.size(), purpose.get<std::string>());
        tmpl.schema_instructions = j["schema_instructions"].get<std::string>();
        check_template(tmpl);
        out.emplace(scenario_id, std::move(tmpl));
    }
    return out;
}

}  // namespace protocheck
