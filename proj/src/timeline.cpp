#include "trialqc/context.hpp"
#include "trialqc/error.hpp"

#include <algorithm>
#include <climits>
#include <tuple>

namespace trialqc::context {

using nlohmann::json;

std::string_view to_string(EventKind k) {
    switch (k) {
    case EventKind::ae_start: return "ae_start";
    case EventKind::ae_end: return "ae_end";
    case EventKind::med_start: return "med_start";
    case EventKind::med_end: return "med_end";
    case EventKind::dose_change: return "dose_change";
    case EventKind::lab: return "lab";
    case EventKind::vital: return "vital";
    case EventKind::procedure: return "procedure";
    }
    return "?";
}

namespace {

Flag flag_of(const LabResult& lb) {
    if (lb.value < lb.normal_low)
        return Flag::low;
    if (lb.value > lb.normal_high)
        return Flag::high;
    return Flag::normal;
}

std::string_view flag_name(Flag f) {
    switch (f) {
    case Flag::low: return "low";
    case Flag::high: return "high";
    default: return "normal";
    }
}

} // namespace

Timeline build_timeline(const StudyDataset& ds, std::string_view patient_id) {
    return build_timeline(view_of(ds, patient_id));
}

Timeline build_timeline(const PatientView& p) {
    Timeline t;
    t.patient_id = p.patient->patient_id;
    auto& ev = t.events;
    for (const auto* ae : p.adverse_events) {
        ev.push_back({ae->start_day, EventKind::ae_start, ae->ae_id, ae->term, ae->grade, Flag::normal});
        if (ae->end_day)
            ev.push_back({*ae->end_day, EventKind::ae_end, ae->ae_id, ae->term, ae->grade, Flag::normal});
    }
    for (const auto* cm : p.conmeds) {
        ev.push_back({cm->start_day, EventKind::med_start, cm->cm_id, cm->drug_name, std::nullopt, Flag::normal});
        if (cm->end_day)
            ev.push_back({*cm->end_day, EventKind::med_end, cm->cm_id, cm->drug_name, std::nullopt, Flag::normal});
    }
    for (const auto* ex : p.exposures)
        ev.push_back({ex->start_day, EventKind::dose_change, ex->ex_id, "study_drug", ex->dose_mg, Flag::normal});
    for (const auto* lb : p.labs)
        ev.push_back({lb->collection_day, EventKind::lab, lb->lab_id, std::string(trialqc::to_string(lb->analyte)),
                      lb->value, flag_of(*lb)});
    for (const auto* vs : p.vitals)
        ev.push_back({vs->day, EventKind::vital, vs->vs_id, "weight", vs->weight_kg, Flag::normal});
    for (const auto* pr : p.procedures)
        ev.push_back({pr->day, EventKind::procedure, pr->pr_id, pr->name, std::nullopt, Flag::normal});
    std::sort(ev.begin(), ev.end(), [](const TimelineEvent& a, const TimelineEvent& b) {
        return std::tie(a.day, a.kind, a.record_id) < std::tie(b.day, b.kind, b.record_id);
    });
    return t;
}

int window_days_from_hours(int window_hours) { return std::max(0, window_hours / 24); }

std::vector<TemporalAssociation> find_temporal_associations(const Timeline& t, const kb::KnowledgeBase& kb,
                                                            int window_hours) {
    const int window = window_days_from_hours(window_hours);
    std::vector<TemporalAssociation> out;
    for (const auto& src : t.events) {
        const bool exposure = src.kind == EventKind::dose_change;
        if (src.kind != EventKind::med_start && !exposure)
            continue;
        const auto* mono = exposure ? nullptr : kb.drug(src.subject);
        const bool hepatotoxic = mono && mono->hepatotoxic;
        for (const auto& dst : t.events) {
            const int lag = dst.day - src.day;
            if (lag < 0 || lag > window)
                continue;
            if (hepatotoxic && dst.kind == EventKind::lab && dst.flag == Flag::high &&
                (dst.subject == "alt" || dst.subject == "ast"))
                out.push_back({src.record_id, dst.record_id, lag, "hepatotoxic_med_liver_enzyme"});
            else if (dst.kind == EventKind::ae_start)
                out.push_back({src.record_id, dst.record_id, lag, "start_to_ae_onset"});
        }
    }
    return out;
}

std::optional<PatternFlag> detect_pattern_heart_failure(const Timeline& t, double weight_gain_kg, int span_days) {
    std::optional<double> baseline;
    std::vector<const TimelineEvent*> gains, bnps;
    struct Interval {
        StudyDay start, end;
        std::string id;
    };
    std::vector<Interval> edema;
    for (const auto& e : t.events) {
        if (e.kind == EventKind::vital && e.value) {
            if (!baseline)
                baseline = *e.value;
            else if (*e.value >= *baseline + weight_gain_kg)
                gains.push_back(&e);
        } else if (e.kind == EventKind::lab && e.subject == "bnp" && e.flag == Flag::high) {
            bnps.push_back(&e);
        } else if (e.kind == EventKind::ae_start && kb::fold(e.subject).find("edema") != std::string::npos) {
            StudyDay end = INT_MAX;
            for (const auto& f : t.events)
                if (f.kind == EventKind::ae_end && f.record_id == e.record_id)
                    end = f.day;
            edema.push_back({e.day, end, e.record_id});
        }
    }
    // Any qualifying triple fits a span iff max(day) - min(day) < span_days, where the
    // edema contributes the day of its interval closest to the other two.
    for (const auto* w : gains)
        for (const auto* b : bnps) {
            StudyDay lo = std::min(w->day, b->day), hi = std::max(w->day, b->day);
            if (hi - lo >= span_days)
                continue;
            for (const auto& iv : edema) {
                StudyDay d = std::clamp(lo, iv.start, iv.end);
                StudyDay s = std::min(lo, d), f = std::max(hi, d);
                if (f - s < span_days)
                    return PatternFlag{"heart_failure", s, s + span_days - 1, {iv.id, w->record_id, b->record_id}};
            }
        }
    return std::nullopt;
}

void to_json(json& j, const TimelineEvent& e) {
    j = json{{"day", e.day}, {"kind", to_string(e.kind)}, {"record_id", e.record_id}, {"subject", e.subject}};
    j["value"] = e.value ? json(*e.value) : json(nullptr);
    j["flag"] = flag_name(e.flag);
}

void to_json(json& j, const TemporalAssociation& a) {
    j = json{{"source_id", a.source_id},
             {"target_id", a.target_id},
             {"lag_days", a.lag_days},
             {"rule_id", a.rule_id},
             {"direction", a.direction}};
}

void to_json(json& j, const PatternFlag& f) {
    j = json{{"pattern", f.pattern},
             {"window_start", f.window_start},
             {"window_end", f.window_end},
             {"evidence", f.evidence}};
}

} // namespace trialqc::context
