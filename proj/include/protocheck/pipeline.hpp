#pragma once

#include <map>
#include <string>
#include <vector>

#include "protocheck/context.hpp"
#include "protocheck/corpus.hpp"
#include "protocheck/evaluate.hpp"
#include "protocheck/llm_client.hpp"
#include "protocheck/prompting.hpp"
#include "protocheck/schema_parse.hpp"

namespace protocheck {

struct RunOptions {
    ContextConfig context;
    BackendConfig backend;
    AblationCondition condition = AblationCondition::temporal_then_semantic;
    bool resume = false;
    double grounding_fuzzy_overlap = 0.6;
    PriorityNormalization normalization = PriorityNormalization::scenario_scaled;
    int token_warn_limit = 8000;
    std::string out_dir;
    std::string predictions_name = "predictions.jsonl";
    std::string run_log_name = "run_log.jsonl";
};

enum class ItemStatus { judged, no_context, rejected, backend_error };

std::string to_string(ItemStatus s);

struct ItemResult {
    std::string session_id;
    std::string scenario_id;
    std::string item_id;
    ItemStatus status = ItemStatus::judged;
    ComplianceJudgment judgment;   // meaningful for judged / no_context
    std::string rejection_reason;  // for rejected
    std::string error_detail;      // for backend_error
    bool fallback_used = false;
    bool no_context = false;
    int context_size = 0;
    bool strict_parse = false;  // first completion passed strict parsing
    bool reask_used = false;
    int attempts = 0;  // completions issued
    int token_estimate = 0;
    long latency_ms = 0;
};

struct RunSummary {
    long total = 0;
    long judged = 0;
    long no_context = 0;
    long rejected = 0;
    long backend_errors = 0;
    long skipped_resume = 0;

    /// 0 on full completion, 2 when some items failed.
    int exit_code() const { return rejected + backend_errors > 0 ? 2 : 0; }
};

/// Context selection with the refinement stage swapped per ablation
/// condition: none feeds the whole transcript, temporal_only stops after
/// windowing, semantic_only thresholds the whole transcript.
ContextSelection select_for_condition(const Session& session, const ChecklistItem& item,
                                      const ContextConfig& cfg, EmbeddingProvider& provider,
                                      AblationCondition condition);

/// Full per-item pipeline: select, short-circuit on empty context, render,
/// complete, parse with one repair pass and one re-ask, ground evidence.
/// Backend and provider failures are captured in the result, not thrown.
ItemResult process_item(const Session& session, const ChecklistItem& item, const RunOptions& opts,
                        Backend& backend, EmbeddingProvider& provider,
                        const PromptTemplate& tmpl);

/// Runs every session x evaluation item through process_item with a worker
/// pool bounded by backend.max_in_flight, streaming results to
/// out_dir/predictions_name in deterministic task order (atomic per-record
/// appends) and a line-JSON run log alongside. With resume, items already
/// present in the predictions file are skipped.
RunSummary run_inference(const std::vector<Session>& sessions, const RunOptions& opts,
                         Backend& backend, EmbeddingProvider& provider,
                         const std::map<std::string, PromptTemplate>& templates);

/// Problems that make a run unstartable (missing templates, bad config,
/// unreadable script); empty means good to go.
std::vector<std::string> preflight_problems(const std::vector<Session>& sessions,
                                            const RunOptions& opts,
                                            const std::map<std::string, PromptTemplate>& templates);

struct ScoreCounts {
    long records = 0;
    long strict = 0;
    long repaired = 0;
    long rejected = 0;
    long no_context = 0;
    long backend_error = 0;
};

struct ScoreResult {
    PriorityNormalization normalization = PriorityNormalization::scenario_scaled;
    ScoreCounts counts;
    std::vector<ScenarioReport> per_scenario;  // sorted by scenario_id
    ScenarioReport overall;                    // pooled over all records
};

/// Scores a predictions file against the ground truth carried by the
/// sessions. Unparsed items (rejected / backend_error) are scored as
/// predicted = !truth, never excluded. Throws on unknown session or item
/// ids and on items lacking ground truth.
ScoreResult score_predictions(const std::string& predictions_path,
                              const std::vector<Session>& sessions,
                              const std::vector<RatingRecord>& ratings,
                              PriorityNormalization mode = PriorityNormalization::scenario_scaled);

/// report.json plus a fixed-width text table.
void write_report(const ScoreResult& result, const std::string& json_path,
                  const std::string& text_path);

struct AblationCell {
    AblationCondition condition = AblationCondition::none;
    bool failed = false;
    std::string error;
    RunSummary summary;
    ScoreResult score;
    std::string predictions_path;
};

/// Runs the pipeline once per condition with otherwise identical config,
/// scoring each pass. A failing cell is marked and the rest continue.
std::vector<AblationCell> run_ablation(const std::vector<Session>& sessions,
                                       const std::vector<AblationCondition>& conditions,
                                       const RunOptions& opts, Backend& backend,
                                       EmbeddingProvider& provider,
                                       const std::map<std::string, PromptTemplate>& templates,
                                       const std::vector<RatingRecord>& ratings = {});

/// summary.json plus the condition comparison table.
void write_ablation_summary(const std::vector<AblationCell>& cells, const std::string& json_path,
                            const std::string& text_path);

}  // namespace protocheck
