#include <doctest.h>

#include "protocheck/corpus.hpp"
#include "test_support.hpp"

using namespace protocheck;
using test_support::TempDir;
using test_support::write_file;

namespace {

const char* kTranscript =
    R"({"index":27,"timestamp_s":812.4,"speaker":"participant","text":"Port Control, Port Control, this is Adventurer, we are proceeding towards Eastern Boarding Ground Charlie and we have a vessel crossing ahead of us. Can you give us the name of that vessel?"}
{"index":32,"timestamp_s":840.0,"speaker":"participant","text":"Challenger, Challenger, this is Adventurer, can you please share your intention and heading?"}
)";

const char* kChecklist = R"({
  "scenario_id": "drill",
  "items": [
    {"item_id": "col-01", "event_id": "collision",
     "text": "Report own vessel's current position and heading to port control", "priority": 4},
    {"item_id": "eng-07", "event_id": "engine_failure",
     "text": "Issue command to display NUC lights", "priority": 2,
     "visibility_condition": "nighttime"}
  ]
})";

}  // namespace

TEST_CASE("load_transcript keeps sparse source indices and densifies ordinals") {
    TempDir dir("corpus");
    write_file(dir.file("t.jsonl"), kTranscript);

    Transcript t = load_transcript(dir.file("t.jsonl"));
    REQUIRE(t.utterances.size() == 2);
    CHECK(t.utterances[0].index == 0);
    CHECK(t.utterances[0].source_index == 27);
    CHECK(t.utterances[0].timestamp_s == doctest::Approx(812.4));
    CHECK(t.utterances[0].speaker == Speaker::participant);
    CHECK(t.utterances[0].text.substr(0, 12) == "Port Control");
    CHECK(t.utterances[1].index == 1);
    CHECK(t.utterances[1].source_index == 32);
}

TEST_CASE("load_transcript rejects bad input with typed errors") {
    TempDir dir("corpus");

    SUBCASE("empty file") {
        write_file(dir.file("t.jsonl"), "");
        try {
            load_transcript(dir.file("t.jsonl"));
            FAIL("expected EmptyTranscript");
        } catch (const CorpusError& e) {
            CHECK(e.code() == CorpusErrorCode::EmptyTranscript);
        }
    }
    SUBCASE("non-monotonic timestamps") {
        write_file(dir.file("t.jsonl"),
                   R"({"index":0,"timestamp_s":10.0,"speaker":"participant","text":"a"}
{"index":1,"timestamp_s":9.0,"speaker":"participant","text":"b"}
)");
        try {
            load_transcript(dir.file("t.jsonl"));
            FAIL("expected NonMonotonicTimestamp");
        } catch (const CorpusError& e) {
            CHECK(e.code() == CorpusErrorCode::NonMonotonicTimestamp);
            CHECK(e.where() == 1);
        }
    }
    SUBCASE("malformed lines never escape as untyped errors") {
        const char* bad_lines[] = {
            "not json at all",
            R"({"index":0,"timestamp_s":1.0,"speaker":"participant"})",          // missing text
            R"({"index":0,"timestamp_s":1.0,"speaker":"captain","text":"x"})",   // bad speaker
            R"({"index":0,"timestamp_s":-2.0,"speaker":"participant","text":"x"})",
            R"({"index":0,"timestamp_s":1.0,"speaker":"participant","text":""})",
            R"({"index":0,"timestamp_s":1.0,"speaker":"participant","text":"x","extra":1})",
            R"({"index":"0","timestamp_s":1.0,"speaker":"participant","text":"x"})",
            R"([1,2,3])",
        };
        for (const char* bad : bad_lines) {
            write_file(dir.file("t.jsonl"), std::string(bad) + "\n");
            try {
                load_transcript(dir.file("t.jsonl"));
                FAIL("expected MalformedLine for: ", bad);
            } catch (const CorpusError& e) {
                CHECK(e.code() == CorpusErrorCode::MalformedLine);
                CHECK(e.where() == 1);
            }
        }
    }
    SUBCASE("equal timestamps are allowed") {
        write_file(dir.file("t.jsonl"),
                   R"({"index":0,"timestamp_s":10.0,"speaker":"participant","text":"a"}
{"index":1,"timestamp_s":10.0,"speaker":"other","text":"b"}
)");
        CHECK(load_transcript(dir.file("t.jsonl")).utterances.size() == 2);
    }
}

TEST_CASE("load_checklist validates priorities, ids and visibility") {
    TempDir dir("corpus");

    SUBCASE("accepts a protocol-style item") {
        write_file(dir.file("c.json"), kChecklist);
        Checklist c = load_checklist(dir.file("c.json"));
        REQUIRE(c.items.size() == 2);
        CHECK(c.items[0].priority == 4);
        CHECK(c.items[0].visibility_condition == VisibilityCondition::any);
        CHECK(c.items[1].visibility_condition == VisibilityCondition::nighttime);
    }
    SUBCASE("priority out of range") {
        write_file(dir.file("c.json"),
                   R"({"scenario_id":"s","items":[{"item_id":"a","event_id":"e","text":"t","priority":5}]})");
        try {
            load_checklist(dir.file("c.json"));
            FAIL("expected PriorityOutOfRange");
        } catch (const CorpusError& e) {
            CHECK(e.code() == CorpusErrorCode::PriorityOutOfRange);
        }
    }
    SUBCASE("duplicate item ids") {
        write_file(dir.file("c.json"),
                   R"({"scenario_id":"s","items":[
                       {"item_id":"eng-01","event_id":"e","text":"t","priority":1},
                       {"item_id":"eng-01","event_id":"e","text":"u","priority":2}]})");
        try {
            load_checklist(dir.file("c.json"));
            FAIL("expected DuplicateItemId");
        } catch (const CorpusError& e) {
            CHECK(e.code() == CorpusErrorCode::DuplicateItemId);
        }
    }
    SUBCASE("unknown visibility condition") {
        write_file(dir.file("c.json"),
                   R"({"scenario_id":"s","items":[{"item_id":"a","event_id":"e","text":"t","priority":1,"visibility_condition":"dusk"}]})");
        try {
            load_checklist(dir.file("c.json"));
            FAIL("expected UnknownVisibility");
        } catch (const CorpusError& e) {
            CHECK(e.code() == CorpusErrorCode::UnknownVisibility);
        }
    }
}

namespace {

Session make_session(Visibility vis) {
    Transcript t;
    t.utterances.push_back({0, 0, 1.0, Speaker::participant, "hello"});

    Checklist c;
    c.scenario_id = "drill";
    c.items.push_back({"col-01", "collision", "report position", 4, VisibilityCondition::any});
    c.items.push_back({"eng-07", "engine_failure", "display NUC lights", 2,
                       VisibilityCondition::nighttime});

    std::vector<EventWindow> events = {{"collision", 100.0, 200.0}, {"engine_failure", 300.0, 400.0}};
    return assemble_session(t, c, events, vis, std::nullopt, "s1");
}

}  // namespace

TEST_CASE("assemble_session enforces cross references") {
    SUBCASE("dangling event reference") {
        Transcript t;
        t.utterances.push_back({0, 0, 1.0, Speaker::participant, "hello"});
        Checklist c;
        c.scenario_id = "drill";
        c.items.push_back({"a", "storm", "text", 1, VisibilityCondition::any});
        try {
            assemble_session(t, c, {}, Visibility::daytime);
            FAIL("expected DanglingEventRef");
        } catch (const CorpusError& e) {
            CHECK(e.code() == CorpusErrorCode::DanglingEventRef);
        }
    }
    SUBCASE("unknown ground truth key") {
        Transcript t;
        t.utterances.push_back({0, 0, 1.0, Speaker::participant, "hello"});
        Checklist c;
        c.scenario_id = "drill";
        c.items.push_back({"a", "e", "text", 1, VisibilityCondition::any});
        std::map<std::string, bool> gt{{"b", true}};
        try {
            assemble_session(t, c, {{"e", 1.0, 2.0}}, Visibility::daytime, gt);
            FAIL("expected UnknownGroundTruthKey");
        } catch (const CorpusError& e) {
            CHECK(e.code() == CorpusErrorCode::UnknownGroundTruthKey);
        }
    }
}

TEST_CASE("visibility filter controls the evaluation set") {
    Session night = make_session(Visibility::nighttime);
    auto night_items = night.evaluation_items();
    REQUIRE(night_items.size() == 2);  // NUC item included at night

    Session day = make_session(Visibility::daytime);
    auto day_items = day.evaluation_items();
    REQUIRE(day_items.size() == 1);  // and excluded by day
    CHECK(day_items[0].item_id == "col-01");

    CHECK(night_items.size() <= night.checklist.items.size());
    CHECK(day_items.size() <= day.checklist.items.size());
}

TEST_CASE("session save/load round trip is identical field by field") {
    TempDir dir("corpus");
    write_file(dir.file("t.jsonl"), kTranscript);
    write_file(dir.file("c.json"), kChecklist);
    write_file(dir.file("s.session.json"), R"({
      "session_id": "s01",
      "transcript": "t.jsonl",
      "checklist": "c.json",
      "events": [
        {"event_id": "collision", "start_s": 800.0, "end_s": 900.0},
        {"event_id": "engine_failure", "start_s": 1000.0, "end_s": 1100.0}
      ],
      "visibility": "nighttime",
      "ground_truth": {"col-01": true, "eng-07": false}
    })");

    Session first = load_session(dir.file("s.session.json"));
    TempDir out("corpus_rt");
    std::string manifest = save_session(first, out.str());
    Session second = load_session(manifest);
    CHECK(first == second);

    TempDir out2("corpus_rt2");
    Session third = load_session(save_session(second, out2.str()));
    CHECK(second == third);
}
