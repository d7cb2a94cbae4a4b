#include "trialqc/patient_view.hpp"

#include "trialqc/error.hpp"

#include <algorithm>

namespace trialqc {

const AdverseEvent* PatientView::find_ae(std::string_view ae_id) const {
    for (const auto* ae : adverse_events)
        if (ae->ae_id == ae_id)
            return ae;
    return nullptr;
}

std::map<std::string, PatientView, std::less<>> index_by_patient(const StudyDataset& ds) {
    std::map<std::string, PatientView, std::less<>> out;
    for (const auto& p : ds.patients)
        out[p.patient_id].patient = &p;
    auto slot = [&](const std::string& pid) -> PatientView& { return out[pid]; };
    for (const auto& r : ds.adverse_events)
        slot(r.patient_id).adverse_events.push_back(&r);
    for (const auto& r : ds.conmeds)
        slot(r.patient_id).conmeds.push_back(&r);
    for (const auto& r : ds.labs)
        slot(r.patient_id).labs.push_back(&r);
    for (const auto& r : ds.vitals)
        slot(r.patient_id).vitals.push_back(&r);
    for (const auto& r : ds.exposures)
        slot(r.patient_id).exposures.push_back(&r);
    for (const auto& r : ds.medical_history)
        slot(r.patient_id).medical_history.push_back(&r);
    for (const auto& r : ds.procedures)
        slot(r.patient_id).procedures.push_back(&r);
    for (auto& [pid, v] : out)
        std::sort(v.exposures.begin(), v.exposures.end(),
                  [](auto* a, auto* b) { return a->start_day < b->start_day; });
    return out;
}

PatientView view_of(const StudyDataset& ds, std::string_view patient_id) {
    const auto* p = ds.find_patient(patient_id);
    if (!p)
        throw NotFoundError("unknown patient " + std::string(patient_id));
    PatientView v;
    v.patient = p;
    for (const auto& r : ds.adverse_events)
        if (r.patient_id == patient_id)
            v.adverse_events.push_back(&r);
    for (const auto& r : ds.conmeds)
        if (r.patient_id == patient_id)
            v.conmeds.push_back(&r);
    for (const auto& r : ds.labs)
        if (r.patient_id == patient_id)
            v.labs.push_back(&r);
    for (const auto& r : ds.vitals)
        if (r.patient_id == patient_id)
            v.vitals.push_back(&r);
    for (const auto& r : ds.exposures)
        if (r.patient_id == patient_id)
            v.exposures.push_back(&r);
    for (const auto& r : ds.medical_history)
        if (r.patient_id == patient_id)
            v.medical_history.push_back(&r);
    for (const auto& r : ds.procedures)
        if (r.patient_id == patient_id)
            v.procedures.push_back(&r);
    std::sort(v.exposures.begin(), v.exposures.end(), [](auto* a, auto* b) { return a->start_day < b->start_day; });
    return v;
}

std::vector<DoseChange> dose_changes(const PatientView& p, StudyDay last_day) {
    std::vector<DoseChange> out;
    const auto& ex = p.exposures;
    for (std::size_t i = 1; i < ex.size(); ++i) {
        if (ex[i]->start_day > ex[i - 1]->end_day + 1)
            out.push_back({DoseChange::Kind::interruption, ex[i - 1]->end_day + 1, ex[i - 1]->ex_id});
        if (ex[i]->dose_mg < ex[i - 1]->dose_mg)
            out.push_back({DoseChange::Kind::reduction, ex[i]->start_day, ex[i]->ex_id});
    }
    if (!ex.empty() && ex.back()->end_day < last_day)
        out.push_back({DoseChange::Kind::withdrawal, ex.back()->end_day + 1, ex.back()->ex_id});
    return out;
}

std::vector<StudyDay> exposure_starts(const PatientView& p) {
    std::vector<StudyDay> out;
    for (const auto* e : p.exposures)
        out.push_back(e->start_day);
    return out;
}

} // namespace trialqc
