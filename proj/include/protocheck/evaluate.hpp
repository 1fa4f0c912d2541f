#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "protocheck/schema_parse.hpp"

namespace protocheck {

/// One prediction/truth pair ready for scoring. scenario_id is the
/// injected-event id the item belongs to; normalization groups records by
/// (session_id, scenario_id), each group being one scenario evaluation set.
struct EvaluationRecord {
    std::string session_id;
    std::string scenario_id;
    std::string item_id;
    bool predicted = false;
    bool truth = false;
    int raw_priority = 1;
    double norm_priority = 0.0;
    Grounding grounded = Grounding::not_applicable;
    std::vector<std::string> repair_applied;
    bool fallback_used = false;
};

struct RatingRecord {
    std::string session_id;
    std::string item_id;
    std::string rater_id;
    int score = 0;  // 3-point Likert: 0, 1 or 2
};

enum class AblationCondition { none, temporal_only, semantic_only, temporal_then_semantic };

std::string to_string(AblationCondition c);
AblationCondition ablation_condition_from_string(const std::string& s);

/// All four conditions in fixed report order.
std::vector<AblationCondition> all_ablation_conditions();

struct ConfusionCounts {
    long tp = 0, fp = 0, tn = 0, fn = 0;

    bool operator==(const ConfusionCounts&) const = default;
};

struct ScenarioReport {
    std::string scenario_id;
    long record_count = 0;
    double weighted_accuracy = 0.0;
    double unweighted_accuracy = 0.0;
    ConfusionCounts confusion;
    double mean_context_size = 0.0;
    std::optional<double> mean_alignment;
    double strict_parse_rate = 0.0;
};

enum class EvaluateErrorCode { EmptyInput, EmptyScenario, MalformedRatings };

class EvaluateError : public std::runtime_error {
public:
    EvaluateError(EvaluateErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    EvaluateErrorCode code() const { return code_; }

private:
    EvaluateErrorCode code_;
};

enum class PriorityNormalization {
    scenario_scaled,  // p_j = q_j * m / sum(q): perfect prediction scores 1.0
    raw_share,        // p_j = q_j / sum(q): sensitivity-analysis alternative
};

std::string to_string(PriorityNormalization n);
PriorityNormalization priority_normalization_from_string(const std::string& s);

/// Fills norm_priority in place, grouping by (session_id, scenario_id).
void normalize_priorities(std::vector<EvaluationRecord>& records,
                          PriorityNormalization mode = PriorityNormalization::scenario_scaled);

/// Priority-weighted accuracy (1/N) * sum of norm_priority over correct
/// records. Summation is grouped per scenario evaluation set so that
/// all-correct inputs score exactly 1.0 and all-wrong exactly 0.0.
double weighted_accuracy(const std::vector<EvaluationRecord>& records);

double unweighted_accuracy(const std::vector<EvaluationRecord>& records);

/// Mean rating in [0,2]; multiple raters on one (session,item) are averaged
/// before the over-items mean.
double alignment_average(const std::vector<RatingRecord>& ratings);

ConfusionCounts confusion_counts(const std::vector<EvaluationRecord>& records);

/// CSV with header session_id,item_id,rater_id,score; scores in {0,1,2}.
std::vector<RatingRecord> load_ratings_csv(const std::string& path);

}  // namespace protocheck
