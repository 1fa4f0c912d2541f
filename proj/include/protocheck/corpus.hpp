#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace protocheck {

enum class Speaker { participant, instructor_roleplay, other };
enum class Visibility { daytime, nighttime };
enum class VisibilityCondition { any, daytime, nighttime };

std::string to_string(Speaker s);
std::string to_string(Visibility v);
std::string to_string(VisibilityCondition v);

/// One transcribed speech turn. `index` is the dense ordinal assigned at
/// load time (0..n-1); `source_index` is whatever the input file carried,
/// which may be sparse. Evidence citations always refer to source_index.
struct Utterance {
    int index = 0;
    int source_index = 0;
    double timestamp_s = 0.0;
    Speaker speaker = Speaker::participant;
    std::string text;

    bool operator==(const Utterance&) const = default;
};

struct Transcript {
    std::string session_id;
    std::vector<Utterance> utterances;

    bool operator==(const Transcript&) const = default;
};

/// A single expected verbal action. `event_id` names the injected event
/// (and thereby the scenario) the item belongs to.
struct ChecklistItem {
    std::string item_id;
    std::string event_id;
    std::string text;
    int priority = 1;  // 1 lowest .. 4 highest
    VisibilityCondition visibility_condition = VisibilityCondition::any;

    bool operator==(const ChecklistItem&) const = default;
};

struct Checklist {
    std::string scenario_id;
    std::vector<ChecklistItem> items;

    bool operator==(const Checklist&) const = default;
};

/// Start/end of one injected event, seconds from session start.
struct EventWindow {
    std::string event_id;
    double start_s = 0.0;
    double end_s = 0.0;

    bool operator==(const EventWindow&) const = default;
};

enum class CorpusErrorCode {
    FileNotFound,
    MalformedLine,
    NonMonotonicTimestamp,
    EmptyTranscript,
    MalformedDocument,
    DuplicateItemId,
    PriorityOutOfRange,
    UnknownVisibility,
    DanglingEventRef,
    UnknownGroundTruthKey,
};

class CorpusError : public std::runtime_error {
public:
    CorpusError(CorpusErrorCode code, const std::string& what, long where = -1)
        : std::runtime_error(what), code_(code), where_(where) {}

    CorpusErrorCode code() const { return code_; }

    /// Line number or utterance index the error refers to, -1 if n/a.
    long where() const { return where_; }

private:
    CorpusErrorCode code_;
    long where_;
};

/// A fully cross-checked scenario session. Immutable after assembly;
/// safe for shared read-only use across workers.
struct Session {
    std::string session_id;
    Transcript transcript;
    Checklist checklist;
    std::vector<EventWindow> events;
    Visibility visibility = Visibility::daytime;
    std::optional<std::map<std::string, bool>> ground_truth;

    bool operator==(const Session&) const = default;

    /// Checklist items applicable under this session's visibility.
    std::vector<ChecklistItem> evaluation_items() const;

    /// The event window an item is anchored to. Throws DanglingEventRef
    /// if unresolved (cannot happen for an assembled Session).
    const EventWindow& event_for(const ChecklistItem& item) const;
};

/// Reads line-delimited JSON, one utterance per line with keys exactly
/// {index, timestamp_s, speaker, text}. Indices are re-densified; the
/// original value is kept as source_index.
Transcript load_transcript(const std::string& path);

Checklist load_checklist(const std::string& path);

Session assemble_session(Transcript transcript, Checklist checklist,
                         std::vector<EventWindow> events, Visibility visibility,
                         std::optional<std::map<std::string, bool>> ground_truth = std::nullopt,
                         std::string session_id = {});

/// Loads a session manifest (session.json). Relative transcript/checklist
/// paths are resolved against the manifest's directory.
Session load_session(const std::string& manifest_path);

/// Writes <session_id>.transcript.jsonl, <session_id>.checklist.json and
/// <session_id>.session.json under dir. Returns the manifest path.
std::string save_session(const Session& session, const std::string& dir);

}  // namespace protocheck
