#include "protocheck/evaluate.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace protocheck {

std::string to_string(AblationCondition c) {
    switch (c) {
        case AblationCondition::none: return "none";
        case AblationCondition::temporal_only: return "temporal_only";
        case AblationCondition::semantic_only: return "semantic_only";
        case AblationCondition::temporal_then_semantic: return "temporal_then_semantic";
    }
    return "none";
}

AblationCondition ablation_condition_from_string(const std::string& s) {
    if (s == "none") return AblationCondition::none;
    if (s == "temporal_only") return AblationCondition::temporal_only;
    if (s == "semantic_only") return AblationCondition::semantic_only;
    if (s == "temporal_then_semantic") return AblationCondition::temporal_then_semantic;
    throw std::invalid_argument("unknown ablation condition '" + s + "'");
}

std::vector<AblationCondition> all_ablation_conditions() {
    return {AblationCondition::none, AblationCondition::temporal_only,
            AblationCondition::semantic_only, AblationCondition::temporal_then_semantic};
}

std::string to_string(PriorityNormalization n) {
    return n == PriorityNormalization::scenario_scaled ? "scenario_scaled" : "raw_share";
}

PriorityNormalization priority_normalization_from_string(const std::string& s) {
    if (s == "scenario_scaled") return PriorityNormalization::scenario_scaled;
    if (s == "raw_share") return PriorityNormalization::raw_share;
    throw std::invalid_argument("unknown priority normalization '" + s + "'");
}

namespace {

using GroupKey = std::pair<std::string, std::string>;  // session_id, scenario_id

std::map<GroupKey, std::vector<std::size_t>> group_records(
    const std::vector<EvaluationRecord>& records) {
    std::map<GroupKey, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < records.size(); ++i)
        groups[{records[i].session_id, records[i].scenario_id}].push_back(i);
    return groups;
}

}  // namespace

void normalize_priorities(std::vector<EvaluationRecord>& records, PriorityNormalization mode) {
    if (records.empty())
        throw EvaluateError(EvaluateErrorCode::EmptyScenario, "no records to normalize");
    for (const auto& r : records)
        if (r.raw_priority < 1 || r.raw_priority > 4)
            throw EvaluateError(EvaluateErrorCode::EmptyScenario,
                                "record '" + r.item_id + "': priority outside [1,4]");

    for (const auto& [key, indices] : group_records(records)) {
        double total = 0.0;
        for (std::size_t i : indices) total += records[i].raw_priority;
        double scale = mode == PriorityNormalization::scenario_scaled
                           ? static_cast<double>(indices.size()) / total
                           : 1.0 / total;
        for (std::size_t i : indices) records[i].norm_priority = records[i].raw_priority * scale;
    }
}

double weighted_accuracy(const std::vector<EvaluationRecord>& records) {
    if (records.empty()) throw EvaluateError(EvaluateErrorCode::EmptyInput, "no records to score");

    // Per group, weight mass is accumulated as a correct/total ratio. The
    // two sums are bitwise identical when every record is correct, so the
    // ratio is exactly 1 and perfect inputs land on exactly 1.0 overall.
    double numerator = 0.0;
    for (const auto& [key, indices] : group_records(records)) {
        double sum_all = 0.0;
        double sum_correct = 0.0;
        for (std::size_t i : indices) {
            sum_all += records[i].norm_priority;
            if (records[i].predicted == records[i].truth)
                sum_correct += records[i].norm_priority;
        }
        if (sum_correct == 0.0 || sum_all == 0.0) continue;
        numerator += std::nearbyint(sum_all) * (sum_correct / sum_all);
    }
    return numerator / static_cast<double>(records.size());
}

double unweighted_accuracy(const std::vector<EvaluationRecord>& records) {
    if (records.empty()) throw EvaluateError(EvaluateErrorCode::EmptyInput, "no records to score");
    long correct = 0;
    for (const auto& r : records)
        if (r.predicted == r.truth) ++correct;
    return static_cast<double>(correct) / static_cast<double>(records.size());
}

double alignment_average(const std::vector<RatingRecord>& ratings) {
    if (ratings.empty()) throw EvaluateError(EvaluateErrorCode::EmptyInput, "no ratings");
    std::map<GroupKey, std::pair<long, long>> per_item;  // (sum, count)
    for (const auto& r : ratings) {
        auto& [sum, count] = per_item[{r.session_id, r.item_id}];
        sum += r.score;
        ++count;
    }
    double total = 0.0;
    for (const auto& [key, sc] : per_item)
        total += static_cast<double>(sc.first) / static_cast<double>(sc.second);
    return total / static_cast<double>(per_item.size());
}

ConfusionCounts confusion_counts(const std::vector<EvaluationRecord>& records) {
    ConfusionCounts c;
    for (const auto& r : records) {
        if (r.predicted && r.truth) ++c.tp;
        else if (r.predicted && !r.truth) ++c.fp;
        else if (!r.predicted && !r.truth) ++c.tn;
        else ++c.fn;
    }
    return c;
}

std::vector<RatingRecord> load_ratings_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw EvaluateError(EvaluateErrorCode::MalformedRatings, "cannot open " + path);

    auto split = [](const std::string& line) {
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        return fields;
    };

    std::string line;
    if (!std::getline(in, line))
        throw EvaluateError(EvaluateErrorCode::MalformedRatings, "empty ratings file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "session_id,item_id,rater_id,score")
        throw EvaluateError(EvaluateErrorCode::MalformedRatings,
                            "unexpected ratings header: " + line);

    std::vector<RatingRecord> out;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split(line);
        if (fields.size() != 4)
            throw EvaluateError(EvaluateErrorCode::MalformedRatings,
                                "line " + std::to_string(line_no) + ": expected 4 fields");
        RatingRecord r;
        r.session_id = fields[0];
        r.item_id = fields[1];
        r.rater_id = fields[2];
        if (fields[3] != "0" && fields[3] != "1" && fields[3] != "2")
            throw EvaluateError(EvaluateErrorCode::MalformedRatings,
                                "line " + std::to_string(line_no) + ": score must be 0, 1 or 2");
        r.score = fields[3][0] - '0';
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace protocheck
