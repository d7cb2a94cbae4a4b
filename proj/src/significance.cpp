#include "trialqc/context.hpp"

#include <algorithm>
#include <cmath>

namespace trialqc::context {

using nlohmann::json;

double relative_deviation(const LabResult& lab) {
    if (lab.value < lab.normal_low)
        return lab.normal_low > 0 ? (lab.normal_low - lab.value) / lab.normal_low : lab.normal_low - lab.value;
    if (lab.value > lab.normal_high)
        return lab.normal_high > 0 ? (lab.value - lab.normal_high) / lab.normal_high : lab.value - lab.normal_high;
    return 0.0;
}

namespace {

kb::Direction direction_of(const LabResult& lab) {
    return lab.value < lab.normal_low ? kb::Direction::below : kb::Direction::above;
}

bool history_explains(const LabResult& lab, const PatientView& p, const kb::KnowledgeBase& kb) {
    for (const auto* mh : p.medical_history) {
        if (!mh->pre_study)
            continue;
        auto term = kb.normalize_term(mh->condition);
        const auto* rule = term ? kb.grading_rule(*term) : nullptr;
        if (rule && rule->analyte == lab.analyte && rule->direction == direction_of(lab))
            return true;
    }
    return false;
}

bool expected_progression(const LabResult& lab, const PatientView& p, const kb::KnowledgeBase& kb) {
    auto within = [&](StudyDay trigger, int window) {
        int lag = lab.collection_day - trigger;
        return lag >= 0 && lag <= window;
    };
    for (const auto& prog : kb.progressions()) {
        if (prog.analyte != lab.analyte || prog.direction != direction_of(lab))
            continue;
        if (prog.trigger.kind == kb::ProgressionTrigger::Kind::study_drug_exposure) {
            for (const auto* ex : p.exposures)
                if (within(ex->start_day, prog.window_days))
                    return true;
        } else {
            for (const auto* cm : p.conmeds) {
                const auto* mono = kb.drug(cm->drug_name);
                if (mono && mono->drug_class == prog.trigger.drug_class && within(cm->start_day, prog.window_days))
                    return true;
            }
        }
    }
    return false;
}

} // namespace

SignificanceScore significance_score(const LabResult& lab, const PatientView& p, const Timeline& t,
                                     const kb::KnowledgeBase& kb, const SignificanceWeights& w) {
    SignificanceScore s{lab.lab_id, 0.0, {}};
    const double dev = relative_deviation(lab);
    if (dev <= 0) {
        s.rationale.push_back("within_normal");
        return s;
    }
    double score = w.magnitude * std::min(1.0, dev / w.full_deviation);
    s.rationale.push_back("magnitude");

    int best_lag = -1;
    for (const auto* ae : p.adverse_events) {
        const auto* rule = kb.grading_rule(ae->term);
        if (!rule || rule->analyte != lab.analyte || rule->direction != direction_of(lab))
            continue;
        int lag = std::abs(lab.collection_day - ae->start_day);
        if (lag <= w.proximity_days && (best_lag < 0 || lag < best_lag))
            best_lag = lag;
    }
    if (best_lag >= 0) {
        score += w.proximity * (1.0 - static_cast<double>(best_lag) / (w.proximity_days + 1));
        s.rationale.push_back("ae_proximity");
    }
    if (auto hf = detect_pattern_heart_failure(t);
        hf && std::find(hf->evidence.begin(), hf->evidence.end(), lab.lab_id) != hf->evidence.end()) {
        score += w.pattern_bonus;
        s.rationale.push_back("heart_failure_pattern");
    }
    if (history_explains(lab, p, kb)) {
        score -= w.history_discount;
        s.rationale.push_back("history_discount");
    }
    if (expected_progression(lab, p, kb)) {
        score -= w.suppression;
        s.rationale.push_back("expected_progression");
    }
    s.score = std::clamp(score, 0.0, 100.0);
    return s;
}

std::vector<json> dump_patient(const StudyDataset& ds, const kb::KnowledgeBase& kb, std::string_view patient_id) {
    auto view = view_of(ds, patient_id);
    auto t = build_timeline(view);
    std::vector<json> lines;
    for (const auto& e : t.events)
        lines.push_back({{"type", "event"}, {"patient_id", t.patient_id}, {"event", e}});
    for (const auto& a : find_temporal_associations(t, kb))
        lines.push_back({{"type", "association"}, {"patient_id", t.patient_id}, {"association", a}});
    for (const auto* lb : view.labs)
        lines.push_back(
            {{"type", "significance"}, {"patient_id", t.patient_id}, {"score", significance_score(*lb, view, t, kb)}});
    if (auto hf = detect_pattern_heart_failure(t))
        lines.push_back({{"type", "pattern"}, {"patient_id", t.patient_id}, {"pattern", *hf}});
    return lines;
}

void to_json(json& j, const SignificanceScore& s) {
    j = json{{"record_id", s.record_id}, {"score", s.score}, {"rationale", s.rationale}};
}

} // namespace trialqc::context
