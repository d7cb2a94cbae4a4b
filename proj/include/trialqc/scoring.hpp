#pragma once

#include "trialqc/detector.hpp"
#include "trialqc/query.hpp"
#include "trialqc/stats.hpp"
#include "trialqc/synth.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace trialqc::eval {

struct CategoryTally {
    int injected = 0;
    int detected = 0;          // annotations matched by any finding
    int correctly_labelled = 0; // matched by a finding of the injected category
};

/// Detector output scored against ground truth, one data point per record. A finding
/// matches an annotation when its primary record is the annotated record; several
/// findings on one record count once. Uncategorized findings are not scored.
struct DetectionScore {
    ConfusionMatrix cm;
    Metrics metrics;
    std::size_t eligible_points = 0;
    std::size_t annotations = 0;
    std::size_t findings_scored = 0;
    std::size_t unverifiable = 0;
    std::optional<double> category_accuracy; // correctly labelled / tp
    std::array<CategoryTally, 6> per_category{};
    std::vector<std::string> missed_record_ids;
    std::vector<std::string> false_positive_finding_ids;
};

DetectionScore score_findings(const std::vector<detect::Finding>& findings,
                              const std::vector<synth::GroundTruthAnnotation>& truth, std::size_t eligible_points);

nlohmann::json to_json(const DetectionScore& s);
nlohmann::json metrics_json(const Metrics& m);

/// Finding ids known to be real discrepancies or clean.
struct SessionTruth {
    std::set<std::string> discrepant;
    std::set<std::string> clean;
};

struct SessionScore {
    std::string session_id;
    std::string reviewer_id;
    query::Condition condition = query::Condition::baseline;
    ConfusionMatrix cm;
    std::optional<Metrics> metrics; // empty for a session without decisions
    int decisions = 0;
    int throughput = 0; // correct decisions (tp + tn) in the session
    std::optional<std::int64_t> duration_ms;
};

struct ReviewerComparison {
    std::string reviewer_id;
    double baseline = 0; // mean throughput over the reviewer's baseline sessions
    double assisted = 0;
    std::optional<double> ratio; // assisted / baseline
};

struct SessionReport {
    std::vector<SessionScore> sessions;
    std::vector<ReviewerComparison> reviewers; // reviewers with both conditions
    std::optional<double> mean_baseline, mean_assisted, median_baseline, median_assisted;
    std::optional<double> ratio_of_means, mean_of_ratios, median_of_ratios;
    std::optional<TTestResult> t_test;
    std::optional<double> cohens_d;
};

SessionScore score_session(const query::ReviewSession& s, const SessionTruth& truth);

/// Throws ValidationError when a decided finding is in neither truth set.
SessionReport score_sessions(const std::vector<query::ReviewSession>& sessions, const SessionTruth& truth);

nlohmann::json to_json(const SessionReport& r);

} // namespace trialqc::eval
