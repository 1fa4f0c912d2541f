#include "protocheck/corpus.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace protocheck {

namespace fs = std::filesystem;
using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string to_string(Speaker s) {
    switch (s) {
        case Speaker::participant: return "participant";
        case Speaker::instructor_roleplay: return "instructor_roleplay";
        case Speaker::other: return "other";
    }
    return "other";
}

std::string to_string(Visibility v) {
    return v == Visibility::daytime ? "daytime" : "nighttime";
}

std::string to_string(VisibilityCondition v) {
    switch (v) {
        case VisibilityCondition::any: return "any";
        case VisibilityCondition::daytime: return "daytime";
        case VisibilityCondition::nighttime: return "nighttime";
    }
    return "any";
}

namespace {

Speaker speaker_from_string(const std::string& s, long line_no) {
    if (s == "participant") return Speaker::participant;
    if (s == "instructor_roleplay") return Speaker::instructor_roleplay;
    if (s == "other") return Speaker::other;
    throw CorpusError(CorpusErrorCode::MalformedLine,
                      "line " + std::to_string(line_no) + ": unknown speaker '" + s + "'",
                      line_no);
}

Visibility visibility_from_string(const std::string& s) {
    if (s == "daytime") return Visibility::daytime;
    if (s == "nighttime") return Visibility::nighttime;
    throw CorpusError(CorpusErrorCode::UnknownVisibility, "unknown visibility '" + s + "'");
}

VisibilityCondition visibility_condition_from_string(const std::string& s) {
    if (s == "any") return VisibilityCondition::any;
    if (s == "daytime") return VisibilityCondition::daytime;
    if (s == "nighttime") return VisibilityCondition::nighttime;
    throw CorpusError(CorpusErrorCode::UnknownVisibility,
                      "unknown visibility_condition '" + s + "'");
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CorpusError(CorpusErrorCode::FileNotFound, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

bool applicable(VisibilityCondition cond, Visibility vis) {
    switch (cond) {
        case VisibilityCondition::any: return true;
        case VisibilityCondition::daytime: return vis == Visibility::daytime;
        case VisibilityCondition::nighttime: return vis == Visibility::nighttime;
    }
    return true;
}

}  // namespace

std::vector<ChecklistItem> Session::evaluation_items() const {
    std::vector<ChecklistItem> out;
    for (const auto& item : checklist.items)
        if (applicable(item.visibility_condition, visibility)) out.push_back(item);
    return out;
}

const EventWindow& Session::event_for(const ChecklistItem& item) const {
    for (const auto& ev : events)
        if (ev.event_id == item.event_id) return ev;
    throw CorpusError(CorpusErrorCode::DanglingEventRef,
                      "item '" + item.item_id + "' references unknown event '" + item.event_id + "'");
}

Transcript load_transcript(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CorpusError(CorpusErrorCode::FileNotFound, "cannot open " + path);

    Transcript t;
    std::string line;
    long line_no = 0;
    int ordinal = 0;
    double prev_ts = 0.0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw CorpusError(CorpusErrorCode::MalformedLine,
                              "line " + std::to_string(line_no) + ": not a JSON object", line_no);
        for (const auto& [key, _] : j.items())
            if (key != "index" && key != "timestamp_s" && key != "speaker" && key != "text")
                throw CorpusError(CorpusErrorCode::MalformedLine,
                                  "line " + std::to_string(line_no) + ": unexpected key '" + key + "'",
                                  line_no);
        if (!j.contains("index") || !j["index"].is_number_integer() ||
            !j.contains("timestamp_s") || !j["timestamp_s"].is_number() ||
            !j.contains("speaker") || !j["speaker"].is_string() ||
            !j.contains("text") || !j["text"].is_string())
            throw CorpusError(CorpusErrorCode::MalformedLine,
                              "line " + std::to_string(line_no) + ": missing or mistyped key", line_no);

        Utterance u;
        u.index = ordinal;
        u.source_index = j["index"].get<int>();
        u.timestamp_s = j["timestamp_s"].get<double>();
        u.speaker = speaker_from_string(j["speaker"].get<std::string>(), line_no);
        u.text = j["text"].get<std::string>();
        if (u.timestamp_s < 0.0 || u.text.empty())
            throw CorpusError(CorpusErrorCode::MalformedLine,
                              "line " + std::to_string(line_no) + ": empty text or negative timestamp",
                              line_no);
        if (ordinal > 0 && u.timestamp_s < prev_ts)
            throw CorpusError(CorpusErrorCode::NonMonotonicTimestamp,
                              "utterance " + std::to_string(ordinal) + ": timestamp decreases",
                              ordinal);
        prev_ts = u.timestamp_s;
        ++ordinal;
        t.utterances.push_back(std::move(u));
    }
    if (t.utterances.empty())
        throw CorpusError(CorpusErrorCode::EmptyTranscript, "empty transcript: " + path);
    return t;
}

namespace {

ChecklistItem parse_checklist_item(const json& j) {
    if (!j.is_object() || !j.contains("item_id") || !j["item_id"].is_string() ||
        !j.contains("event_id") || !j["event_id"].is_string() ||
        !j.contains("text") || !j["text"].is_string() ||
        !j.contains("priority") || !j["priority"].is_number_integer())
        throw CorpusError(CorpusErrorCode::MalformedDocument, "malformed checklist item");

    ChecklistItem item;
    item.item_id = j["item_id"].get<std::string>();
    item.event_id = j["event_id"].get<std::string>();
    item.text = j["text"].get<std::string>();
    item.priority = j["priority"].get<int>();
    if (item.item_id.empty() || item.event_id.empty() || item.text.empty())
        throw CorpusError(CorpusErrorCode::MalformedDocument, "empty field in checklist item");
    if (item.priority < 1 || item.priority > 4)
        throw CorpusError(CorpusErrorCode::PriorityOutOfRange,
                          "item '" + item.item_id + "': priority " + std::to_string(item.priority) +
                              " outside [1,4]");
    if (j.contains("visibility_condition")) {
        if (!j["visibility_condition"].is_string())
            throw CorpusError(CorpusErrorCode::UnknownVisibility, "visibility_condition must be a string");
        item.visibility_condition =
            visibility_condition_from_string(j["visibility_condition"].get<std::string>());
    }
    return item;
}

}  // namespace

Checklist load_checklist(const std::string& path) {
    json j = json::parse(read_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("scenario_id") ||
        !j["scenario_id"].is_string() || !j.contains("items") || !j["items"].is_array())
        throw CorpusError(CorpusErrorCode::MalformedDocument, "malformed checklist document: " + path);

    Checklist c;
    c.scenario_id = j["scenario_id"].get<std::string>();
    std::set<std::string> seen;
    for (const auto& ij : j["items"]) {
        ChecklistItem item = parse_checklist_item(ij);
        if (!seen.insert(item.item_id).second)
            throw CorpusError(CorpusErrorCode::DuplicateItemId,
                              "duplicate item_id '" + item.item_id + "'");
        c.items.push_back(std::move(item));
    }
    if (c.items.empty())
        throw CorpusError(CorpusErrorCode::MalformedDocument, "checklist has no items: " + path);
    return c;
}

Session assemble_session(Transcript transcript, Checklist checklist,
                         std::vector<EventWindow> events, Visibility visibility,
                         std::optional<std::map<std::string, bool>> ground_truth,
                         std::string session_id) {
    std::set<std::string> event_ids;
    for (const auto& ev : events) {
        if (!(ev.start_s < ev.end_s) || ev.start_s < 0.0)
            throw CorpusError(CorpusErrorCode::MalformedDocument,
                              "event '" + ev.event_id + "': invalid window");
        if (!event_ids.insert(ev.event_id).second)
            throw CorpusError(CorpusErrorCode::MalformedDocument,
                              "duplicate event_id '" + ev.event_id + "'");
    }
    std::set<std::string> item_ids;
    for (const auto& item : checklist.items) {
        item_ids.insert(item.item_id);
        if (!event_ids.count(item.event_id))
            throw CorpusError(CorpusErrorCode::DanglingEventRef,
                              "item '" + item.item_id + "' references unknown event '" +
                                  item.event_id + "'");
    }
    if (ground_truth)
        for (const auto& [key, _] : *ground_truth)
            if (!item_ids.count(key))
                throw CorpusError(CorpusErrorCode::UnknownGroundTruthKey,
                                  "ground truth key '" + key + "' not in checklist");

    Session s;
    s.session_id = session_id.empty() ? transcript.session_id : std::move(session_id);
    s.transcript = std::move(transcript);
    s.transcript.session_id = s.session_id;
    s.checklist = std::move(checklist);
    s.events = std::move(events);
    s.visibility = visibility;
    s.ground_truth = std::move(ground_truth);
    return s;
}

Session load_session(const std::string& manifest_path) {
    json j = json::parse(read_file(manifest_path), nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("session_id") ||
        !j["session_id"].is_string() || !j.contains("transcript") || !j["transcript"].is_string() ||
        !j.contains("checklist") || !j["checklist"].is_string() || !j.contains("events") ||
        !j["events"].is_array() || !j.contains("visibility") || !j["visibility"].is_string())
        throw CorpusError(CorpusErrorCode::MalformedDocument,
                          "malformed session manifest: " + manifest_path);

    fs::path base = fs::path(manifest_path).parent_path();
    auto resolve = [&](const std::string& p) {
        fs::path fp(p);
        return fp.is_absolute() ? fp.string() : (base / fp).string();
    };

    Transcript transcript = load_transcript(resolve(j["transcript"].get<std::string>()));
    Checklist checklist = load_checklist(resolve(j["checklist"].get<std::string>()));

    std::vector<EventWindow> events;
    for (const auto& ej : j["events"]) {
        if (!ej.is_object() || !ej.contains("event_id") || !ej["event_id"].is_string() ||
            !ej.contains("start_s") || !ej["start_s"].is_number() || !ej.contains("end_s") ||
            !ej["end_s"].is_number())
            throw CorpusError(CorpusErrorCode::MalformedDocument, "malformed event entry");
        events.push_back({ej["event_id"].get<std::string>(), ej["start_s"].get<double>(),
                          ej["end_s"].get<double>()});
    }

    std::optional<std::map<std::string, bool>> gt;
    if (j.contains("ground_truth")) {
        if (!j["ground_truth"].is_object())
            throw CorpusError(CorpusErrorCode::MalformedDocument, "ground_truth must be an object");
        std::map<std::string, bool> m;
        for (const auto& [key, val] : j["ground_truth"].items()) {
            if (!val.is_boolean())
                throw CorpusError(CorpusErrorCode::MalformedDocument,
                                  "ground_truth['" + key + "'] must be boolean");
            m[key] = val.get<bool>();
        }
        gt = std::move(m);
    }

    return assemble_session(std::move(transcript), std::move(checklist), std::move(events),
                            visibility_from_string(j["visibility"].get<std::string>()),
                            std::move(gt), j["session_id"].get<std::string>());
}

std::string save_session(const Session& session, const std::string& dir) {
    fs::create_directories(dir);
    fs::path base(dir);
    std::string transcript_name = session.session_id + ".transcript.jsonl";
    std::string checklist_name = session.session_id + ".checklist.json";
    std::string manifest_name = session.session_id + ".session.json";

    {
        std::ofstream out(base / transcript_name, std::ios::binary);
        for (const auto& u : session.transcript.utterances) {
            ordered_json j;
            j["index"] = u.source_index;
            j["timestamp_s"] = u.timestamp_s;
            j["speaker"] = to_string(u.speaker);
            j["text"] = u.text;
            out << j.dump() << "\n";
        }
    }
    {
        ordered_json j;
        j["scenario_id"] = session.checklist.scenario_id;
        j["items"] = ordered_json::array();
        for (const auto& item : session.checklist.items) {
            ordered_json ij;
            ij["item_id"] = item.item_id;
            ij["event_id"] = item.event_id;
            ij["text"] = item.text;
            ij["priority"] = item.priority;
            ij["visibility_condition"] = to_string(item.visibility_condition);
            j["items"].push_back(std::move(ij));
        }
        std::ofstream out(base / checklist_name, std::ios::binary);
        out << j.dump(2) << "\n";
    }
    {
        ordered_json j;
        j["session_id"] = session.session_id;
        j["transcript"] = transcript_name;
        j["checklist"] = checklist_name;
        j["events"] = ordered_json::array();
        for (const auto& ev : session.events) {
            ordered_json ej;
            ej["event_id"] = ev.event_id;
            ej["start_s"] = ev.start_s;
            ej["end_s"] = ev.end_s;
            j["events"].push_back(std::move(ej));
        }
        j["visibility"] = to_string(session.visibility);
        if (session.ground_truth) {
            ordered_json gt = ordered_json::object();
            for (const auto& [key, val] : *session.ground_truth) gt[key] = val;
            j["ground_truth"] = std::move(gt);
        }
        std::ofstream out(base / manifest_name, std::ios::binary);
        out << j.dump(2) << "\n";
    }
    return (base / manifest_name).string();
}

}  // namespace protocheck
