#include "trialqc/csv.hpp"
#include "trialqc/detector.hpp"
#include "trialqc/patient_view.hpp"

#include <algorithm>
#include <cstdlib>

namespace trialqc::detect {

namespace {

std::string num(double v) { return csv::format_number(v); }

Severity escalate(Severity base, const AdverseEvent* ae) {
    if (ae && (ae->serious || ae->grade >= 3))
        return Severity::critical;
    return base;
}

Finding make(int category, const std::string& patient_id, std::vector<std::string> evidence, Severity severity,
             double confidence, std::string rationale, std::map<std::string, std::string> facts) {
    Finding f;
    f.finding_id = "F-" + std::to_string(category) + "-" + evidence.front();
    f.patient_id = patient_id;
    f.record_ids = std::move(evidence);
    f.category = category;
    f.severity = severity;
    f.confidence = confidence;
    f.rationale = std::move(rationale);
    f.facts = std::move(facts);
    f.facts["patient_id"] = patient_id;
    return f;
}

/// Labs of the rule's analyte graded abnormal within `window` days, nearest first.
std::vector<const LabResult*> graded_labs(const PatientView& p, const kb::GradingRule& rule, StudyDay day,
                                          int window) {
    std::vector<const LabResult*> out;
    for (const auto* lb : p.labs)
        if (lb->analyte == rule.analyte && std::abs(lb->collection_day - day) <= window &&
            kb::KnowledgeBase::grade_with(rule, lb->value).graded())
            out.push_back(lb);
    std::stable_sort(out.begin(), out.end(), [&](const LabResult* a, const LabResult* b) {
        int da = std::abs(a->collection_day - day), db = std::abs(b->collection_day - day);
        return std::tie(da, a->lab_id) < std::tie(db, b->lab_id);
    });
    return out;
}

DoseChange::Kind expected_change(ActionTaken a) {
    switch (a) {
    case ActionTaken::dose_interrupted: return DoseChange::Kind::interruption;
    case ActionTaken::drug_withdrawn: return DoseChange::Kind::withdrawal;
    default: return DoseChange::Kind::reduction;
    }
}

std::string_view change_name(DoseChange::Kind k) {
    switch (k) {
    case DoseChange::Kind::reduction: return "dose reduction";
    case DoseChange::Kind::interruption: return "dose interruption";
    default: return "withdrawal";
    }
}

} // namespace

std::vector<Finding> check_conmed_indication(const StudyDataset& ds, const kb::KnowledgeBase& kb, const Tolerances&) {
    std::vector<Finding> out;
    for (const auto& cm : ds.conmeds) {
        const AdverseEvent* ae = cm.linked_ae_id ? ds.find_ae(*cm.linked_ae_id) : nullptr;
        std::optional<std::string> term = ae ? kb.normalize_term(ae->term) : kb.normalize_term(cm.indication_text);
        if (!term)
            continue;
        std::vector<std::string> evidence{cm.cm_id};
        if (ae)
            evidence.push_back(ae->ae_id);
        std::map<std::string, std::string> facts{{"drug", cm.drug_name}, {"ae_term", *term}, {"cm_id", cm.cm_id}};
        if (ae)
            facts["ae_id"] = ae->ae_id;
        switch (kb.indicated_for(cm.drug_name, *term)) {
        case kb::Indication::indicated:
            break;
        case kb::Indication::not_indicated:
            out.push_back(make(1, cm.patient_id, std::move(evidence), escalate(Severity::major, ae), 0.85,
                               cm.drug_name + " is not indicated for " + *term, std::move(facts)));
            break;
        case kb::Indication::unknown_drug: {
            Finding f = make(1, cm.patient_id, std::move(evidence), Severity::minor, 0.3,
                             cm.drug_name + " is not in the knowledge base; indication for " + *term +
                                 " cannot be verified",
                             std::move(facts));
            f.category.reset();
            f.finding_id = "F-U-" + cm.cm_id;
            out.push_back(std::move(f));
            break;
        }
        }
    }
    return out;
}

std::vector<Finding> check_conmed_timing(const StudyDataset& ds, const Tolerances& tol) {
    std::vector<Finding> out;
    const StudyDay last = ds.last_observed_day();
    for (const auto& cm : ds.conmeds) {
        const AdverseEvent* ae = cm.linked_ae_id ? ds.find_ae(*cm.linked_ae_id) : nullptr;
        if (!ae)
            continue;
        const StudyDay ae_end = effective_end(*ae, last);
        int gap = 0;
        std::string relation;
        if (cm.start_day < ae->start_day - tol.conmed_timing_days) {
            gap = ae->start_day - cm.start_day;
            relation = "before the adverse event started";
        } else if (cm.start_day > ae_end + tol.conmed_timing_days) {
            gap = cm.start_day - ae_end;
            relation = "after the adverse event ended";
        } else {
            continue;
        }
        out.push_back(make(2, cm.patient_id, {cm.cm_id, ae->ae_id}, escalate(Severity::minor, ae), 0.8,
                           cm.drug_name + " started " + std::to_string(gap) + " days " + relation,
                           {{"drug", cm.drug_name},
                            {"ae_term", ae->term},
                            {"cm_id", cm.cm_id},
                            {"ae_id", ae->ae_id},
                            {"cm_start", std::to_string(cm.start_day)},
                            {"ae_start", std::to_string(ae->start_day)},
                            {"ae_end", ae->end_day ? std::to_string(*ae->end_day) : "ongoing"},
                            {"gap_days", std::to_string(gap)},
                            {"relation", relation}}));
    }
    return out;
}

std::vector<Finding> check_severity(const StudyDataset& ds, const kb::KnowledgeBase& kb, const Tolerances& tol) {
    std::vector<Finding> out;
    for (const auto& [pid, p] : index_by_patient(ds)) {
        for (const auto* ae : p.adverse_events) {
            if (ae->grade >= 5)
                continue;
            std::map<std::string, std::string> facts{
                {"ae_term", ae->term}, {"ae_id", ae->ae_id}, {"coded_grade", std::to_string(ae->grade)}};
            const int cue = kb.narrative_min_grade(ae->narrative);
            if (cue > ae->grade) {
                facts["expected_grade"] = std::to_string(cue);
                facts["basis"] = "the narrative \"" + ae->narrative + "\"";
                out.push_back(make(3, pid, {ae->ae_id}, escalate(Severity::major, ae), 0.8,
                                   "narrative implies grade >= " + std::to_string(cue) + " but grade " +
                                       std::to_string(ae->grade) + " is coded",
                                   std::move(facts)));
                continue;
            }
            const auto* rule = kb.grading_rule(ae->term);
            if (!rule)
                continue;
            auto labs = graded_labs(p, *rule, ae->start_day, tol.lab_match_days);
            if (labs.empty())
                continue;
            const auto* lb = labs.front();
            const int lab_grade = kb::KnowledgeBase::grade_with(*rule, lb->value).grade;
            if (lab_grade == ae->grade)
                continue;
            facts["expected_grade"] = std::to_string(lab_grade);
            facts["basis"] = std::string(to_string(lb->analyte)) + " " + num(lb->value) + " " + lb->units +
                             " on day " + std::to_string(lb->collection_day);
            facts["lab_id"] = lb->lab_id;
            Finding f = make(3, pid, {ae->ae_id, lb->lab_id}, escalate(Severity::major, ae), 0.85,
                             std::string(to_string(lb->analyte)) + " " + num(lb->value) + " grades as " +
                                 std::to_string(lab_grade) + " but grade " + std::to_string(ae->grade) +
                                 " is coded",
                             std::move(facts));
            if (lab_grade >= 3)
                f.severity = Severity::critical;
            out.push_back(std::move(f));
        }
    }
    return out;
}

std::vector<Finding> check_dose_action(const StudyDataset& ds, const Tolerances& tol) {
    std::vector<Finding> out;
    const StudyDay last = ds.last_observed_day();
    for (const auto& [pid, p] : index_by_patient(ds)) {
        const auto changes = dose_changes(p, last);
        for (const auto* ae : p.adverse_events) {
            if (ae->action_taken == ActionTaken::none)
                continue;
            const auto want = expected_change(ae->action_taken);
            bool matched = std::any_of(changes.begin(), changes.end(), [&](const DoseChange& c) {
                return c.kind == want && std::abs(c.day - ae->start_day) <= tol.dose_change_days;
            });
            if (matched)
                continue;
            std::vector<std::string> evidence{ae->ae_id};
            std::string doses;
            for (const auto* ex : p.exposures) {
                if (ex->end_day < ae->start_day - tol.dose_change_days ||
                    ex->start_day > ae->start_day + tol.dose_change_days)
                    continue;
                evidence.push_back(ex->ex_id);
                if (!doses.empty())
                    doses += ", ";
                doses += num(ex->dose_mg) + " mg on days " + std::to_string(ex->start_day) + "-" +
                         std::to_string(ex->end_day);
            }
            out.push_back(make(4, pid, std::move(evidence), escalate(Severity::major, ae), 0.8,
                               "action '" + std::string(to_string(ae->action_taken)) + "' but no " +
                                   std::string(change_name(want)) + " within " +
                                   std::to_string(tol.dose_change_days) + " days of onset",
                               {{"ae_term", ae->term},
                                {"ae_id", ae->ae_id},
                                {"action", std::string(to_string(ae->action_taken))},
                                {"expected_change", std::string(change_name(want))},
                                {"exposure_detail", doses.empty() ? "no dosing records" : doses}}));
        }
        for (const auto& c : changes) {
            if (c.kind != DoseChange::Kind::reduction)
                continue;
            bool documented = std::any_of(p.adverse_events.begin(), p.adverse_events.end(), [&](const auto* ae) {
                return ae->action_taken == ActionTaken::dose_reduced &&
                       std::abs(ae->start_day - c.day) <= tol.dose_change_days;
            });
            if (documented)
                continue;
            const ExposureRecord* ex = nullptr;
            const ExposureRecord* prev = nullptr;
            for (const auto* e : p.exposures) {
                if (e->ex_id == c.ex_id)
                    ex = e;
                else if (!ex)
                    prev = e;
            }
            std::vector<std::string> evidence{c.ex_id};
            if (prev)
                evidence.push_back(prev->ex_id);
            for (const auto* ae : p.adverse_events)
                if (ae->start_day <= c.day && c.day <= effective_end(*ae, last))
                    evidence.push_back(ae->ae_id);
            std::string detail = (prev ? num(prev->dose_mg) : std::string("?")) + " mg to " +
                                 (ex ? num(ex->dose_mg) : std::string("?")) + " mg on day " + std::to_string(c.day);
            out.push_back(make(4, pid, std::move(evidence), Severity::major, 0.8,
                               "dose reduced (" + detail + ") with no adverse event documenting the reduction",
                               {{"ae_term", "no adverse event"},
                                {"action", "none"},
                                {"expected_change", "documented dose_reduced action"},
                                {"exposure_detail", detail}}));
        }
    }
    return out;
}

std::vector<Finding> check_causality(const StudyDataset& ds, const kb::KnowledgeBase& kb, const Tolerances& tol) {
    std::vector<Finding> out;
    for (const auto& [pid, p] : index_by_patient(ds)) {
        const auto starts = exposure_starts(p);
        if (starts.empty())
            continue;
        const StudyDay first = *std::min_element(starts.begin(), starts.end());
        for (const auto* ae : p.adverse_events) {
            std::map<std::string, std::string> facts{{"ae_term", ae->term},
                                                     {"ae_id", ae->ae_id},
                                                     {"causality", std::string(to_string(ae->causality))},
                                                     {"ae_start", std::to_string(ae->start_day)},
                                                     {"first_dose", std::to_string(first)}};
            if (ae->causality == Causality::related && ae->start_day < first) {
                facts["basis"] = "onset on day " + std::to_string(ae->start_day) + " precedes the first dose on day " +
                                 std::to_string(first);
                out.push_back(make(5, pid, {ae->ae_id, p.exposures.front()->ex_id}, escalate(Severity::major, ae),
                                   0.95, "related to study drug but " + facts["basis"], std::move(facts)));
                continue;
            }
            if (ae->causality != Causality::not_related || !kb.is_study_drug_toxicity(ae->term))
                continue;
            const ExposureRecord* near = nullptr;
            for (const auto* ex : p.exposures) {
                int lag = ae->start_day - ex->start_day;
                if (lag >= 0 && lag <= tol.causality_days)
                    near = ex;
            }
            if (!near)
                continue;
            facts["basis"] = ae->term + " is a known study-drug toxicity with onset " +
                             std::to_string(ae->start_day - near->start_day) + " days after dosing on day " +
                             std::to_string(near->start_day);
            out.push_back(make(5, pid, {ae->ae_id, near->ex_id}, escalate(Severity::major, ae), 0.75,
                               "assessed not related although " + facts["basis"], std::move(facts)));
        }
    }
    return out;
}

std::vector<Finding> check_supporting_data(const StudyDataset& ds, const kb::KnowledgeBase& kb,
                                           const Tolerances& tol) {
    std::vector<Finding> out;
    for (const auto& [pid, p] : index_by_patient(ds)) {
        for (const auto* ae : p.adverse_events) {
            const auto* rule = kb.grading_rule(ae->term);
            if (!rule || !graded_labs(p, *rule, ae->start_day, tol.supporting_lab_days).empty())
                continue;
            const std::string analyte(to_string(rule->analyte));
            out.push_back(make(6, pid, {ae->ae_id}, escalate(Severity::major, ae), 0.8,
                               "no abnormal " + analyte + " within " + std::to_string(tol.supporting_lab_days) +
                                   " days of onset",
                               {{"ae_term", ae->term},
                                {"ae_id", ae->ae_id},
                                {"analyte", analyte},
                                {"window", std::to_string(tol.supporting_lab_days)},
                                {"ae_start", std::to_string(ae->start_day)}}));
        }
    }
    return out;
}

} // namespace trialqc::detect
