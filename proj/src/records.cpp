#include "trialqc/records.hpp"

#include "trialqc/error.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace trialqc {

namespace {

template <class T, class Key>
const T* find_by(const std::vector<T>& v, std::string_view id, Key key) {
    auto it = std::find_if(v.begin(), v.end(), [&](const T& r) { return r.*key == id; });
    return it == v.end() ? nullptr : &*it;
}

template <class T, class Key>
void sort_by(std::vector<T>& v, Key key) {
    std::sort(v.begin(), v.end(), [&](const T& a, const T& b) { return a.*key < b.*key; });
}

template <class T, class Key>
bool same_set(std::vector<T> a, std::vector<T> b, Key key) {
    if (a.size() != b.size())
        return false;
    sort_by(a, key);
    sort_by(b, key);
    return a == b;
}

} // namespace

std::size_t StudyDataset::record_count() const {
    return patients.size() + adverse_events.size() + conmeds.size() + labs.size() + vitals.size() +
           exposures.size() + medical_history.size() + procedures.size();
}

StudyDay StudyDataset::last_observed_day() const {
    StudyDay last = 1;
    for (const auto& r : adverse_events)
        last = std::max({last, r.start_day, r.end_day.value_or(r.start_day)});
    for (const auto& r : conmeds)
        last = std::max({last, r.start_day, r.end_day.value_or(r.start_day)});
    for (const auto& r : labs)
        last = std::max(last, r.collection_day);
    for (const auto& r : vitals)
        last = std::max(last, r.day);
    for (const auto& r : exposures)
        last = std::max(last, r.end_day);
    for (const auto& r : procedures)
        last = std::max(last, r.day);
    return last;
}

const Patient* StudyDataset::find_patient(std::string_view id) const {
    return find_by(patients, id, &Patient::patient_id);
}
const AdverseEvent* StudyDataset::find_ae(std::string_view id) const {
    return find_by(adverse_events, id, &AdverseEvent::ae_id);
}
const ConcomitantMedication* StudyDataset::find_conmed(std::string_view id) const {
    return find_by(conmeds, id, &ConcomitantMedication::cm_id);
}
const LabResult* StudyDataset::find_lab(std::string_view id) const {
    return find_by(labs, id, &LabResult::lab_id);
}
const ExposureRecord* StudyDataset::find_exposure(std::string_view id) const {
    return find_by(exposures, id, &ExposureRecord::ex_id);
}

bool same_records(const StudyDataset& a, const StudyDataset& b) {
    return same_set(a.patients, b.patients, &Patient::patient_id) &&
           same_set(a.adverse_events, b.adverse_events, &AdverseEvent::ae_id) &&
           same_set(a.conmeds, b.conmeds, &ConcomitantMedication::cm_id) &&
           same_set(a.labs, b.labs, &LabResult::lab_id) && same_set(a.vitals, b.vitals, &VitalSign::vs_id) &&
           same_set(a.exposures, b.exposures, &ExposureRecord::ex_id) &&
           same_set(a.medical_history, b.medical_history, &MedicalHistoryItem::mh_id) &&
           same_set(a.procedures, b.procedures, &Procedure::pr_id);
}

void sort_canonical(StudyDataset& ds) {
    sort_by(ds.patients, &Patient::patient_id);
    sort_by(ds.adverse_events, &AdverseEvent::ae_id);
    sort_by(ds.conmeds, &ConcomitantMedication::cm_id);
    sort_by(ds.labs, &LabResult::lab_id);
    sort_by(ds.vitals, &VitalSign::vs_id);
    sort_by(ds.exposures, &ExposureRecord::ex_id);
    sort_by(ds.medical_history, &MedicalHistoryItem::mh_id);
    sort_by(ds.procedures, &Procedure::pr_id);
}

void validate(const StudyDataset& ds) {
    std::set<std::string> ids;
    auto claim = [&](const std::string& id) {
        if (id.empty())
            throw ValidationError("empty record id");
        if (!ids.insert(id).second)
            throw ValidationError("duplicate record id " + id);
    };
    std::set<std::string> patient_ids;
    for (const auto& p : ds.patients) {
        claim(p.patient_id);
        patient_ids.insert(p.patient_id);
        if (p.age < 18 || p.age > 120)
            throw ValidationError(p.patient_id + ": age out of range 18–120");
    }

    std::vector<std::string> dangling;
    auto check_patient = [&](const std::string& rid, const std::string& pid) {
        if (!patient_ids.count(pid))
            dangling.push_back(rid);
    };

    std::set<std::string> ae_ids;
    for (const auto& ae : ds.adverse_events) {
        claim(ae.ae_id);
        ae_ids.insert(ae.ae_id);
        check_patient(ae.ae_id, ae.patient_id);
        if (ae.grade < 1 || ae.grade > 5)
            throw ValidationError(ae.ae_id + ": grade out of range 1–5");
        if (ae.end_day && *ae.end_day < ae.start_day)
            throw ValidationError(ae.ae_id + ": end_day before start_day");
    }
    for (const auto& cm : ds.conmeds) {
        claim(cm.cm_id);
        check_patient(cm.cm_id, cm.patient_id);
        if (cm.end_day && *cm.end_day < cm.start_day)
            throw ValidationError(cm.cm_id + ": end_day before start_day");
        if (cm.linked_ae_id && !ae_ids.count(*cm.linked_ae_id))
            dangling.push_back(cm.cm_id);
    }
    for (const auto& lb : ds.labs) {
        claim(lb.lab_id);
        check_patient(lb.lab_id, lb.patient_id);
        if (!(lb.value >= 0.0))
            throw ValidationError(lb.lab_id + ": negative lab value");
        if (!(lb.normal_low < lb.normal_high))
            throw ValidationError(lb.lab_id + ": normal_low must be below normal_high");
    }
    for (const auto& vs : ds.vitals) {
        claim(vs.vs_id);
        check_patient(vs.vs_id, vs.patient_id);
    }
    std::map<std::string, std::vector<const ExposureRecord*>> by_patient;
    for (const auto& ex : ds.exposures) {
        claim(ex.ex_id);
        check_patient(ex.ex_id, ex.patient_id);
        if (ex.end_day < ex.start_day)
            throw ValidationError(ex.ex_id + ": end_day before start_day");
        if (ex.dose_mg < 0.0)
            throw ValidationError(ex.ex_id + ": negative dose");
        by_patient[ex.patient_id].push_back(&ex);
    }
    for (auto& [pid, list] : by_patient) {
        std::sort(list.begin(), list.end(), [](auto* a, auto* b) { return a->start_day < b->start_day; });
        for (std::size_t i = 1; i < list.size(); ++i)
            if (list[i]->start_day <= list[i - 1]->end_day)
                throw ValidationError("exposure records overlap: " + list[i - 1]->ex_id + ", " + list[i]->ex_id);
    }
    for (const auto& mh : ds.medical_history) {
        claim(mh.mh_id);
        check_patient(mh.mh_id, mh.patient_id);
    }
    for (const auto& pr : ds.procedures) {
        claim(pr.pr_id);
        check_patient(pr.pr_id, pr.patient_id);
    }
    if (!dangling.empty()) {
        std::ostringstream msg;
        msg << "dangling foreign key in:";
        for (const auto& id : dangling)
            msg << ' ' << id;
        throw IntegrityError(msg.str(), std::move(dangling));
    }
}

std::string_view to_string(Sex v) { return v == Sex::female ? "F" : "M"; }

std::string_view to_string(Causality v) {
    switch (v) {
    case Causality::related: return "related";
    case Causality::possibly_related: return "possibly_related";
    case Causality::not_related: return "not_related";
    }
    return "";
}

std::string_view to_string(ActionTaken v) {
    switch (v) {
    case ActionTaken::none: return "none";
    case ActionTaken::dose_reduced: return "dose_reduced";
    case ActionTaken::dose_interrupted: return "dose_interrupted";
    case ActionTaken::drug_withdrawn: return "drug_withdrawn";
    }
    return "";
}

namespace {
struct AnalyteInfo {
    Analyte analyte;
    std::string_view code;
    std::string_view units;
};
constexpr AnalyteInfo kAnalytes[] = {
    {Analyte::hemoglobin, "hemoglobin", "g/dL"},  {Analyte::platelets, "platelets", "10^9/L"},
    {Analyte::neutrophils, "neutrophils", "10^9/L"}, {Analyte::alt, "alt", "U/L"},
    {Analyte::ast, "ast", "U/L"},                 {Analyte::bilirubin, "bilirubin", "mg/dL"},
    {Analyte::creatinine, "creatinine", "mg/dL"}, {Analyte::potassium, "potassium", "mmol/L"},
    {Analyte::bnp, "bnp", "pg/mL"},
};
} // namespace

std::string_view to_string(Analyte v) {
    for (const auto& a : kAnalytes)
        if (a.analyte == v)
            return a.code;
    return "";
}

std::string_view default_units(Analyte v) {
    for (const auto& a : kAnalytes)
        if (a.analyte == v)
            return a.units;
    return "";
}

std::string_view to_string(Domain v) {
    switch (v) {
    case Domain::demographics: return "demographics";
    case Domain::adverse_events: return "adverse_events";
    case Domain::concomitant_medications: return "concomitant_medications";
    case Domain::labs: return "labs";
    case Domain::vitals: return "vitals";
    case Domain::exposure: return "exposure";
    case Domain::medical_history: return "medical_history";
    case Domain::procedures: return "procedures";
    }
    return "";
}

std::optional<Sex> parse_sex(std::string_view s) {
    if (s == "F")
        return Sex::female;
    if (s == "M")
        return Sex::male;
    return std::nullopt;
}

std::optional<Causality> parse_causality(std::string_view s) {
    for (auto c : {Causality::related, Causality::possibly_related, Causality::not_related})
        if (to_string(c) == s)
            return c;
    return std::nullopt;
}

std::optional<ActionTaken> parse_action(std::string_view s) {
    for (auto a : {ActionTaken::none, ActionTaken::dose_reduced, ActionTaken::dose_interrupted,
                   ActionTaken::drug_withdrawn})
        if (to_string(a) == s)
            return a;
    return std::nullopt;
}

std::optional<Analyte> parse_analyte(std::string_view s) {
    for (const auto& a : kAnalytes)
        if (a.code == s)
            return a.analyte;
    return std::nullopt;
}

} // namespace trialqc
