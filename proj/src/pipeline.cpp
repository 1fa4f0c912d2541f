#include "protocheck/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace protocheck {

namespace fs = std::filesystem;
using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string to_string(ItemStatus s) {
    switch (s) {
        case ItemStatus::judged: return "judged";
        case ItemStatus::no_context: return "no_context";
        case ItemStatus::rejected: return "rejected";
        case ItemStatus::backend_error: return "backend_error";
    }
    return "judged";
}

ContextSelection select_for_condition(const Session& session, const ChecklistItem& item,
                                      const ContextConfig& cfg, EmbeddingProvider& provider,
                                      AblationCondition condition) {
    switch (condition) {
        case AblationCondition::temporal_then_semantic:
            return select_context(session, item, cfg, provider);
        case AblationCondition::none: {
            ContextSelection sel;
            sel.item_id = item.item_id;
            sel.temporal_candidates = session.transcript.utterances;
            sel.selected = session.transcript.utterances;
            return sel;
        }
        case AblationCondition::temporal_only: {
            ContextSelection sel;
            sel.item_id = item.item_id;
            sel.temporal_candidates = temporal_extract(session.transcript, session.event_for(item), cfg);
            sel.selected = sel.temporal_candidates;
            sel.fallback_used = sel.selected.empty();
            return sel;
        }
        case AblationCondition::semantic_only: {
            ContextSelection sel;
            sel.item_id = item.item_id;
            sel.temporal_candidates = session.transcript.utterances;
            for (auto& su : semantic_refine(sel.temporal_candidates, item, cfg, provider))
                sel.selected.push_back(std::move(su.utterance));
            sel.fallback_used = sel.selected.empty();
            return sel;
        }
    }
    throw std::logic_error("unhandled ablation condition");
}

ItemResult process_item(const Session& session, const ChecklistItem& item, const RunOptions& opts,
                        Backend& backend, EmbeddingProvider& provider,
                        const PromptTemplate& tmpl) {
    ItemResult r;
    r.session_id = session.session_id;
    r.scenario_id = item.event_id;
    r.item_id = item.item_id;
    r.judgment.item_id = item.item_id;

    try {
        ContextSelection sel = select_for_condition(session, item, opts.context, provider,
                                                    opts.condition);
        r.fallback_used = sel.fallback_used;
        r.context_size = static_cast<int>(sel.selected.size());

        if (sel.selected.empty()) {
            // Empty-context policy: non-compliant verdict without inference.
            r.status = ItemStatus::no_context;
            r.no_context = true;
            r.judgment.is_completed = false;
            r.judgment.grounded = Grounding::not_applicable;
            return r;
        }

        PromptBundle bundle = render_prompt(sel, item, tmpl);
        r.token_estimate = bundle.token_estimate;

        RawCompletion completion = backend.complete(session.session_id, bundle);
        r.attempts = 1;
        r.latency_ms = completion.latency_ms;

        ParseResult parsed = parse_strict(completion, bundle.context_digest);
        if (std::holds_alternative<ComplianceJudgment>(parsed)) {
            r.strict_parse = true;
        } else {
            parsed = repair_and_parse(completion, bundle.context_digest);
        }

        if (std::holds_alternative<ParseRejection>(parsed)) {
            // One re-ask with the schema instruction appended verbatim.
            PromptBundle again = bundle;
            again.rendered_text += "\n\n" + tmpl.schema_instructions;
            again.token_estimate = estimate_tokens(again.rendered_text);
            RawCompletion retry = backend.complete(session.session_id, again);
            r.attempts = 2;
            r.reask_used = true;
            r.latency_ms += retry.latency_ms;
            parsed = parse_strict(retry, again.context_digest);
            if (std::holds_alternative<ParseRejection>(parsed))
                parsed = repair_and_parse(retry, again.context_digest);
        }

        if (auto* judgment = std::get_if<ComplianceJudgment>(&parsed)) {
            r.status = ItemStatus::judged;
            r.judgment = ground_evidence(std::move(*judgment), bundle.context_digest,
                                         opts.grounding_fuzzy_overlap);
        } else {
            r.status = ItemStatus::rejected;
            r.rejection_reason = to_string(std::get<ParseRejection>(parsed).reason);
        }
    } catch (const std::exception& e) {
        r.status = ItemStatus::backend_error;
        r.error_detail = e.what();
    }
    return r;
}

namespace {

std::string iso_utc_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

ordered_json config_echo(const RunOptions& opts) {
    ordered_json j;
    j["condition"] = to_string(opts.condition);
    j["context"] = {{"delta_pre_s", opts.context.delta_pre_s},
                    {"delta_post_s", opts.context.delta_post_s},
                    {"tau", opts.context.tau},
                    {"empty_fallback", to_string(opts.context.empty_fallback)},
                    {"top_k", opts.context.top_k}};
    j["backend"] = {{"kind", to_string(opts.backend.kind)},
                    {"base_url", opts.backend.base_url},
                    {"model_id", opts.backend.model_id},
                    {"temperature", opts.backend.temperature},
                    {"max_output_tokens", opts.backend.max_output_tokens},
                    {"request_timeout_s", opts.backend.request_timeout_s},
                    {"max_retries", opts.backend.max_retries},
                    {"max_in_flight", opts.backend.max_in_flight}};
    j["grounding_fuzzy_overlap"] = opts.grounding_fuzzy_overlap;
    j["normalization"] = to_string(opts.normalization);
    j["resume"] = opts.resume;
    return j;
}

ordered_json prediction_line(const ItemResult& r) {
    ordered_json j;
    j["session_id"] = r.session_id;
    j["scenario_id"] = r.scenario_id;
    j["item_id"] = r.item_id;
    switch (r.status) {
        case ItemStatus::judged: j["parse_status"] = r.strict_parse ? "strict" : "repaired"; break;
        case ItemStatus::no_context: j["parse_status"] = "no_context"; break;
        case ItemStatus::rejected: j["parse_status"] = "rejected"; break;
        case ItemStatus::backend_error: j["parse_status"] = "backend_error"; break;
    }
    bool has_verdict = r.status == ItemStatus::judged || r.status == ItemStatus::no_context;
    j["predicted"] = has_verdict ? ordered_json(r.judgment.is_completed) : ordered_json(nullptr);
    j["index"] = has_verdict && r.judgment.index ? ordered_json(*r.judgment.index)
                                                 : ordered_json(nullptr);
    j["evidence"] = has_verdict && r.judgment.evidence ? ordered_json(*r.judgment.evidence)
                                                       : ordered_json(nullptr);
    j["grounded"] = to_string(has_verdict ? r.judgment.grounded : Grounding::not_applicable);
    j["no_context"] = r.no_context;
    j["fallback_used"] = r.fallback_used;
    j["context_size"] = r.context_size;
    j["reask_used"] = r.reask_used;
    j["repair_applied"] = r.judgment.repair_applied;
    j["rejection_reason"] = r.status == ItemStatus::rejected ? ordered_json(r.rejection_reason)
                                                             : ordered_json(nullptr);
    return j;
}

struct Task {
    const Session* session;
    ChecklistItem item;
};

}  // namespace

std::vector<std::string> preflight_problems(const std::vector<Session>& sessions,
                                            const RunOptions& opts,
                                            const std::map<std::string, PromptTemplate>& templates) {
    std::vector<std::string> problems;
    if (sessions.empty()) problems.push_back("no sessions given");
    try {
        validate(opts.backend);
    } catch (const std::exception& e) {
        problems.push_back(std::string("backend config: ") + e.what());
    }
    if (opts.context.tau < -1.0 || opts.context.tau > 1.0)
        problems.push_back("context config: tau must be in [-1,1]");
    if (opts.context.delta_pre_s < 0.0 || opts.context.delta_post_s < 0.0)
        problems.push_back("context config: buffers must be non-negative");
    if (opts.context.top_k <= 0) problems.push_back("context config: top_k must be positive");
    if (opts.out_dir.empty()) problems.push_back("output directory not set");

    std::set<std::string> session_ids;
    for (const auto& session : sessions) {
        if (!session_ids.insert(session.session_id).second)
            problems.push_back("duplicate session_id '" + session.session_id + "'");
        for (const auto& item : session.evaluation_items())
            if (!templates.count(item.event_id))
                problems.push_back("no prompt template for scenario '" + item.event_id +
                                   "' (item '" + item.item_id + "')");
    }
    return problems;
}

RunSummary run_inference(const std::vector<Session>& sessions, const RunOptions& opts,
                         Backend& backend, EmbeddingProvider& provider,
                         const std::map<std::string, PromptTemplate>& templates) {
    fs::create_directories(opts.out_dir);
    fs::path predictions_path = fs::path(opts.out_dir) / opts.predictions_name;
    fs::path log_path = fs::path(opts.out_dir) / opts.run_log_name;

    std::set<std::string> already_done;
    if (opts.resume && fs::exists(predictions_path)) {
        std::ifstream in(predictions_path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            json j = json::parse(line, nullptr, false);
            if (!j.is_discarded() && j.contains("session_id") && j.contains("item_id"))
                already_done.insert(j["session_id"].get<std::string>() + "/" +
                                    j["item_id"].get<std::string>());
        }
    }

    std::vector<Task> tasks;
    RunSummary summary;
    for (const auto& session : sessions)
        for (const auto& item : session.evaluation_items()) {
            if (already_done.count(session.session_id + "/" + item.item_id)) {
                ++summary.skipped_resume;
                continue;
            }
            tasks.push_back({&session, item});
        }
    summary.total = static_cast<long>(tasks.size()) + summary.skipped_resume;

    std::ofstream predictions(predictions_path, std::ios::binary | std::ios::app);
    std::ofstream run_log(log_path, std::ios::binary | std::ios::app);
    if (!predictions || !run_log)
        throw std::runtime_error("cannot open output files under " + opts.out_dir);

    {
        ordered_json header;
        header["type"] = "run_header";
        header["started_at"] = iso_utc_now();
        header["sessions"] = static_cast<long>(sessions.size());
        header["items"] = summary.total;
        header["skipped_resume"] = summary.skipped_resume;
        header["config"] = config_echo(opts);
        run_log << header.dump() << "\n" << std::flush;
    }

    // Workers fill results; the main thread commits them in task order so
    // output bytes never depend on completion order.
    std::vector<std::unique_ptr<ItemResult>> results(tasks.size());
    std::mutex mutex;
    std::condition_variable cv;
    std::atomic<std::size_t> next_task{0};

    auto worker = [&] {
        while (true) {
            std::size_t i = next_task.fetch_add(1);
            if (i >= tasks.size()) return;
            auto result = std::make_unique<ItemResult>(process_item(
                *tasks[i].session, tasks[i].item, opts, backend, provider,
                templates.at(tasks[i].item.event_id)));
            {
                std::lock_guard<std::mutex> lock(mutex);
                results[i] = std::move(result);
            }
            cv.notify_one();
        }
    };

    std::size_t n_workers = std::min<std::size_t>(
        static_cast<std::size_t>(std::max(1, opts.backend.max_in_flight)), tasks.size());
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);

    for (std::size_t commit = 0; commit < tasks.size(); ++commit) {
        std::unique_ptr<ItemResult> result;
        {
            std::unique_lock<std::mutex> lock(mutex);
            cv.wait(lock, [&] { return results[commit] != nullptr; });
            result = std::move(results[commit]);
        }
        const ItemResult& r = *result;
        switch (r.status) {
            case ItemStatus::judged: ++summary.judged; break;
            case ItemStatus::no_context: ++summary.no_context; break;
            case ItemStatus::rejected: ++summary.rejected; break;
            case ItemStatus::backend_error: ++summary.backend_errors; break;
        }
        predictions << prediction_line(r).dump() << "\n" << std::flush;

        ordered_json entry;
        entry["type"] = r.status == ItemStatus::backend_error ? "error" : "item";
        entry["session_id"] = r.session_id;
        entry["item_id"] = r.item_id;
        entry["status"] = to_string(r.status);
        entry["attempts"] = r.attempts;
        entry["fallback_used"] = r.fallback_used;
        entry["context_size"] = r.context_size;
        entry["token_estimate"] = r.token_estimate;
        entry["latency_ms"] = r.latency_ms;
        entry["repair_applied"] = r.judgment.repair_applied;
        if (r.status == ItemStatus::rejected) entry["rejection_reason"] = r.rejection_reason;
        if (r.status == ItemStatus::backend_error) entry["detail"] = r.error_detail;
        if (r.token_estimate > opts.token_warn_limit) entry["token_warning"] = true;
        run_log << entry.dump() << "\n" << std::flush;
    }

    for (auto& t : pool) t.join();

    ordered_json footer;
    footer["type"] = "run_footer";
    footer["total"] = summary.total;
    footer["judged"] = summary.judged;
    footer["no_context"] = summary.no_context;
    footer["rejected"] = summary.rejected;
    footer["backend_errors"] = summary.backend_errors;
    footer["skipped_resume"] = summary.skipped_resume;
    footer["exit_code"] = summary.exit_code();
    run_log << footer.dump() << "\n" << std::flush;

    return summary;
}

namespace {

struct ParsedPrediction {
    std::string session_id;
    std::string scenario_id;
    std::string item_id;
    std::string parse_status;
    std::optional<bool> predicted;
    Grounding grounded = Grounding::not_applicable;
    std::vector<std::string> repair_applied;
    bool fallback_used = false;
    int context_size = 0;
};

Grounding grounding_from_string(const std::string& s) {
    if (s == "exact") return Grounding::exact;
    if (s == "fuzzy") return Grounding::fuzzy;
    if (s == "ungrounded") return Grounding::ungrounded;
    return Grounding::not_applicable;
}

std::vector<ParsedPrediction> load_predictions(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open predictions file: " + path);
    std::vector<ParsedPrediction> out;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw std::runtime_error("predictions line " + std::to_string(line_no) +
                                     " is not a JSON object");
        ParsedPrediction p;
        p.session_id = j.at("session_id").get<std::string>();
        p.scenario_id = j.at("scenario_id").get<std::string>();
        p.item_id = j.at("item_id").get<std::string>();
        p.parse_status = j.at("parse_status").get<std::string>();
        if (j.contains("predicted") && j["predicted"].is_boolean())
            p.predicted = j["predicted"].get<bool>();
        if (j.contains("grounded") && j["grounded"].is_string())
            p.grounded = grounding_from_string(j["grounded"].get<std::string>());
        if (j.contains("repair_applied") && j["repair_applied"].is_array())
            for (const auto& t : j["repair_applied"]) p.repair_applied.push_back(t.get<std::string>());
        if (j.contains("fallback_used") && j["fallback_used"].is_boolean())
            p.fallback_used = j["fallback_used"].get<bool>();
        if (j.contains("context_size") && j["context_size"].is_number_integer())
            p.context_size = j["context_size"].get<int>();
        out.push_back(std::move(p));
    }
    return out;
}

ScenarioReport build_scenario_report(const std::string& scenario_id,
                                     const std::vector<EvaluationRecord>& records,
                                     const std::vector<double>& context_sizes,
                                     const std::vector<bool>& strict_flags,
                                     const std::vector<bool>& parse_ran_flags,
                                     std::optional<double> mean_alignment) {
    ScenarioReport report;
    report.scenario_id = scenario_id;
    report.record_count = static_cast<long>(records.size());
    report.weighted_accuracy = weighted_accuracy(records);
    report.unweighted_accuracy = unweighted_accuracy(records);
    report.confusion = confusion_counts(records);
    double ctx_total = 0.0;
    for (double c : context_sizes) ctx_total += c;
    report.mean_context_size = context_sizes.empty() ? 0.0 : ctx_total / context_sizes.size();
    long parse_ran = 0, strict = 0;
    for (std::size_t i = 0; i < strict_flags.size(); ++i) {
        if (parse_ran_flags[i]) ++parse_ran;
        if (strict_flags[i]) ++strict;
    }
    report.strict_parse_rate = parse_ran == 0 ? 0.0 : static_cast<double>(strict) / parse_ran;
    report.mean_alignment = mean_alignment;
    return report;
}

}  // namespace

ScoreResult score_predictions(const std::string& predictions_path,
                              const std::vector<Session>& sessions,
                              const std::vector<RatingRecord>& ratings,
                              PriorityNormalization mode) {
    auto predictions = load_predictions(predictions_path);
    if (predictions.empty())
        throw EvaluateError(EvaluateErrorCode::EmptyInput, "predictions file is empty");

    std::map<std::string, const Session*> by_session;
    for (const auto& s : sessions) by_session[s.session_id] = &s;

    // item_id -> scenario, for rating scoping; item ids are unique per
    // checklist and shared across sessions running the same protocol.
    std::map<std::string, std::string> item_scenario;
    for (const auto& s : sessions)
        for (const auto& item : s.checklist.items) item_scenario[item.item_id] = item.event_id;

    std::map<std::pair<std::string, std::string>, ChecklistItem> eval_items;
    for (const auto& s : sessions)
        for (const auto& item : s.evaluation_items()) eval_items[{s.session_id, item.item_id}] = item;

    struct Row {
        EvaluationRecord record;
        double context_size;
        bool strict;
        bool parse_ran;
    };
    std::vector<Row> rows;
    for (const auto& p : predictions) {
        auto session_it = by_session.find(p.session_id);
        if (session_it == by_session.end())
            throw std::runtime_error("prediction references unknown session '" + p.session_id + "'");
        const Session& session = *session_it->second;

        auto item_it = eval_items.find({p.session_id, p.item_id});
        if (item_it == eval_items.end())
            throw std::runtime_error("prediction references unknown item '" + p.item_id +
                                     "' in session '" + p.session_id + "'");
        const ChecklistItem& item = item_it->second;

        if (!session.ground_truth || !session.ground_truth->count(p.item_id))
            throw std::runtime_error("MissingGroundTruth: item '" + p.item_id + "' of session '" +
                                     p.session_id + "'");
        bool truth = session.ground_truth->at(p.item_id);

        Row row;
        row.record.session_id = p.session_id;
        row.record.scenario_id = item.event_id;
        row.record.item_id = p.item_id;
        row.record.truth = truth;
        // Items without a parseable verdict always score as incorrect.
        row.record.predicted = p.predicted ? *p.predicted : !truth;
        row.record.raw_priority = item.priority;
        row.record.grounded = p.grounded;
        row.record.repair_applied = p.repair_applied;
        row.record.fallback_used = p.fallback_used;
        row.context_size = p.context_size;
        row.strict = p.parse_status == "strict";
        row.parse_ran = p.parse_status == "strict" || p.parse_status == "repaired" ||
                        p.parse_status == "rejected";
        rows.push_back(std::move(row));
    }

    for (const auto& r : ratings) {
        if (!by_session.count(r.session_id))
            throw EvaluateError(EvaluateErrorCode::MalformedRatings,
                                "rating references unknown session '" + r.session_id + "'");
        if (!item_scenario.count(r.item_id))
            throw EvaluateError(EvaluateErrorCode::MalformedRatings,
                                "rating references unknown item '" + r.item_id + "'");
    }

    std::vector<EvaluationRecord> all_records;
    for (const auto& row : rows) all_records.push_back(row.record);
    normalize_priorities(all_records, mode);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].record = all_records[i];

    ScoreResult result;
    result.normalization = mode;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        ++result.counts.records;
        const auto& p = predictions[i];
        if (p.parse_status == "strict") ++result.counts.strict;
        else if (p.parse_status == "repaired") ++result.counts.repaired;
        else if (p.parse_status == "rejected") ++result.counts.rejected;
        else if (p.parse_status == "no_context") ++result.counts.no_context;
        else if (p.parse_status == "backend_error") ++result.counts.backend_error;
    }

    std::set<std::string> scenario_ids;
    for (const auto& row : rows) scenario_ids.insert(row.record.scenario_id);

    auto alignment_for = [&](const std::string& scenario_id) -> std::optional<double> {
        std::vector<RatingRecord> scoped;
        for (const auto& r : ratings) {
            if (!scenario_id.empty() && item_scenario.at(r.item_id) != scenario_id) continue;
            scoped.push_back(r);
        }
        if (scoped.empty()) return std::nullopt;
        return alignment_average(scoped);
    };

    for (const auto& scenario_id : scenario_ids) {
        std::vector<EvaluationRecord> records;
        std::vector<double> sizes;
        std::vector<bool> strict_flags, parse_ran_flags;
        for (const auto& row : rows) {
            if (row.record.scenario_id != scenario_id) continue;
            records.push_back(row.record);
            sizes.push_back(row.context_size);
            strict_flags.push_back(row.strict);
            parse_ran_flags.push_back(row.parse_ran);
        }
        result.per_scenario.push_back(build_scenario_report(scenario_id, records, sizes,
                                                            strict_flags, parse_ran_flags,
                                                            alignment_for(scenario_id)));
    }

    std::vector<double> sizes;
    std::vector<bool> strict_flags, parse_ran_flags;
    for (const auto& row : rows) {
        sizes.push_back(row.context_size);
        strict_flags.push_back(row.strict);
        parse_ran_flags.push_back(row.parse_ran);
    }
    result.overall = build_scenario_report("overall", all_records, sizes, strict_flags,
                                           parse_ran_flags, alignment_for(""));
    return result;
}

namespace {

ordered_json report_entry(const ScenarioReport& r) {
    ordered_json j;
    j["scenario_id"] = r.scenario_id;
    j["records"] = r.record_count;
    j["weighted_accuracy"] = r.weighted_accuracy;
    j["unweighted_accuracy"] = r.unweighted_accuracy;
    j["tp"] = r.confusion.tp;
    j["fp"] = r.confusion.fp;
    j["tn"] = r.confusion.tn;
    j["fn"] = r.confusion.fn;
    j["mean_context_size"] = r.mean_context_size;
    j["strict_parse_rate"] = r.strict_parse_rate;
    j["mean_alignment"] = r.mean_alignment ? ordered_json(*r.mean_alignment) : ordered_json(nullptr);
    return j;
}

std::string format_row(const ScenarioReport& r) {
    std::ostringstream out;
    out << std::left << std::setw(24) << r.scenario_id << std::right << std::setw(5)
        << r.record_count << std::fixed << std::setprecision(4) << std::setw(10)
        << r.weighted_accuracy << std::setw(12) << r.unweighted_accuracy << std::setw(5)
        << r.confusion.tp << std::setw(5) << r.confusion.fp << std::setw(5) << r.confusion.tn
        << std::setw(5) << r.confusion.fn << std::setprecision(2) << std::setw(8)
        << r.mean_context_size << std::setprecision(4) << std::setw(8) << r.strict_parse_rate;
    if (r.mean_alignment)
        out << std::setprecision(2) << std::setw(7) << *r.mean_alignment;
    else
        out << std::setw(7) << "-";
    return out.str();
}

const char* kTableHeader =
    "scenario                    n  weighted  unweighted   tp   fp   tn   fn     ctx  strict  align";

}  // namespace

void write_report(const ScoreResult& result, const std::string& json_path,
                  const std::string& text_path) {
    ordered_json j;
    j["normalization"] = to_string(result.normalization);
    j["counts"] = {{"records", result.counts.records},
                   {"strict", result.counts.strict},
                   {"repaired", result.counts.repaired},
                   {"rejected", result.counts.rejected},
                   {"no_context", result.counts.no_context},
                   {"backend_error", result.counts.backend_error}};
    j["scenarios"] = ordered_json::array();
    for (const auto& r : result.per_scenario) j["scenarios"].push_back(report_entry(r));
    j["overall"] = report_entry(result.overall);
    std::ofstream out(json_path, std::ios::binary);
    out << j.dump(2) << "\n";

    std::ofstream text(text_path, std::ios::binary);
    text << kTableHeader << "\n";
    for (const auto& r : result.per_scenario) text << format_row(r) << "\n";
    text << format_row(result.overall) << "\n";
}

std::vector<AblationCell> run_ablation(const std::vector<Session>& sessions,
                                       const std::vector<AblationCondition>& conditions,
                                       const RunOptions& opts, Backend& backend,
                                       EmbeddingProvider& provider,
                                       const std::map<std::string, PromptTemplate>& templates,
                                       const std::vector<RatingRecord>& ratings) {
    std::vector<AblationCell> cells;
    for (AblationCondition condition : conditions) {
        AblationCell cell;
        cell.condition = condition;
        try {
            RunOptions cell_opts = opts;
            cell_opts.condition = condition;
            cell_opts.predictions_name = "predictions_" + to_string(condition) + ".jsonl";
            cell_opts.run_log_name = "run_log_" + to_string(condition) + ".jsonl";
            cell.summary = run_inference(sessions, cell_opts, backend, provider, templates);
            cell.predictions_path =
                (fs::path(cell_opts.out_dir) / cell_opts.predictions_name).string();
            cell.score = score_predictions(cell.predictions_path, sessions, ratings,
                                           cell_opts.normalization);
            write_report(cell.score,
                         (fs::path(opts.out_dir) / ("report_" + to_string(condition) + ".json"))
                             .string(),
                         (fs::path(opts.out_dir) / ("report_" + to_string(condition) + ".txt"))
                             .string());
        } catch (const std::exception& e) {
            cell.failed = true;
            cell.error = e.what();
        }
        cells.push_back(std::move(cell));
    }
    return cells;
}

void write_ablation_summary(const std::vector<AblationCell>& cells, const std::string& json_path,
                            const std::string& text_path) {
    ordered_json j;
    j["conditions"] = ordered_json::array();
    for (const auto& cell : cells) {
        ordered_json cj;
        cj["condition"] = to_string(cell.condition);
        cj["failed"] = cell.failed;
        if (cell.failed) {
            cj["error"] = cell.error;
        } else {
            cj["mean_context_size"] = cell.score.overall.mean_context_size;
            cj["weighted_accuracy"] = cell.score.overall.weighted_accuracy;
            cj["unweighted_accuracy"] = cell.score.overall.unweighted_accuracy;
            cj["mean_alignment"] = cell.score.overall.mean_alignment
                                       ? ordered_json(*cell.score.overall.mean_alignment)
                                       : ordered_json(nullptr);
            cj["records"] = cell.score.overall.record_count;
        }
        j["conditions"].push_back(std::move(cj));
    }
    std::ofstream out(json_path, std::ios::binary);
    out << j.dump(2) << "\n";

    std::ofstream text(text_path, std::ios::binary);
    text << "condition                       ctx  weighted  unweighted  align\n";
    for (const auto& cell : cells) {
        std::ostringstream row;
        row << std::left << std::setw(28) << to_string(cell.condition);
        if (cell.failed) {
            row << "FAILED: " << cell.error;
        } else {
            row << std::right << std::fixed << std::setprecision(2) << std::setw(7)
                << cell.score.overall.mean_context_size << std::setprecision(4) << std::setw(10)
                << cell.score.overall.weighted_accuracy << std::setw(12)
                << cell.score.overall.unweighted_accuracy;
            if (cell.score.overall.mean_alignment)
                row << std::setprecision(2) << std::setw(7) << *cell.score.overall.mean_alignment;
            else
                row << std::setw(7) << "-";
        }
        text << row.str() << "\n";
    }
}

}  // namespace protocheck
