#pragma once

#include "trialqc/knowledge_base.hpp"
#include "trialqc/patient_view.hpp"
#include "trialqc/records.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace trialqc::context {

// Declaration order is the tie-break order for events on the same day.
enum class EventKind { ae_start, ae_end, med_start, med_end, dose_change, lab, vital, procedure };

std::string_view to_string(EventKind k);

enum class Flag { normal, low, high };

struct TimelineEvent {
    StudyDay day = 0;
    EventKind kind = EventKind::ae_start;
    std::string record_id;
    std::string subject;         // AE term, drug name, analyte, "weight" or procedure name
    std::optional<double> value; // lab value, weight or dose
    Flag flag = Flag::normal;

    friend bool operator==(const TimelineEvent&, const TimelineEvent&) = default;
};

struct Timeline {
    std::string patient_id;
    std::vector<TimelineEvent> events; // sorted by (day, kind, record_id)
};

/// Throws NotFoundError for an unknown patient.
Timeline build_timeline(const StudyDataset& ds, std::string_view patient_id);
Timeline build_timeline(const PatientView& p);

struct TemporalAssociation {
    std::string source_id;
    std::string target_id;
    int lag_days = 0;
    std::string rule_id; // "hepatotoxic_med_liver_enzyme" or "start_to_ae_onset"
    std::string direction = "forward";

    friend bool operator==(const TemporalAssociation&, const TemporalAssociation&) = default;
};

/// Hours are converted to whole study days (rounded down, at least 0).
int window_days_from_hours(int window_hours);

/// Hepatotoxic medication start -> ALT/AST above normal, and exposure or medication
/// start -> AE onset, each with 0 <= lag <= window.
std::vector<TemporalAssociation> find_temporal_associations(const Timeline& t, const kb::KnowledgeBase& kb,
                                                            int window_hours = 72);

struct PatternFlag {
    std::string pattern = "heart_failure";
    StudyDay window_start = 0;
    StudyDay window_end = 0;
    std::vector<std::string> evidence; // edema AE, weight vital, BNP lab
};

/// Weight >= baseline + 2 kg, an active edema AE and BNP above normal, all within one
/// 14-day span. Baseline is the first recorded weight; any AE term containing "edema"
/// (including "oedema") counts.
std::optional<PatternFlag> detect_pattern_heart_failure(const Timeline& t, double weight_gain_kg = 2.0,
                                                        int span_days = 14);

struct SignificanceWeights {
    double magnitude = 60;      // reached at relative deviation `full_deviation`
    double full_deviation = 0.5;
    double proximity = 25;      // matching AE onset on the same day
    int proximity_days = 7;
    double history_discount = 25;
    double suppression = 40;
    double pattern_bonus = 15;
    double flag_threshold = 40;
};

struct SignificanceScore {
    std::string record_id;
    double score = 0;
    std::vector<std::string> rationale;

    bool flagged(const SignificanceWeights& w = {}) const { return score >= w.flag_threshold; }
};

/// Lab abnormality relative to the nearest normal bound (0 inside the range).
double relative_deviation(const LabResult& lab);

/// Scores one lab in its patient's context. Normal labs score 0.
SignificanceScore significance_score(const LabResult& lab, const PatientView& p, const Timeline& t,
                                     const kb::KnowledgeBase& kb, const SignificanceWeights& w = {});

/// Debug dump for one patient: events, associations, lab scores and patterns, one JSON
/// object per line.
std::vector<nlohmann::json> dump_patient(const StudyDataset& ds, const kb::KnowledgeBase& kb,
                                         std::string_view patient_id);

void to_json(nlohmann::json& j, const TimelineEvent& e);
void to_json(nlohmann::json& j, const TemporalAssociation& a);
void to_json(nlohmann::json& j, const PatternFlag& f);
void to_json(nlohmann::json& j, const SignificanceScore& s);

} // namespace trialqc::context
