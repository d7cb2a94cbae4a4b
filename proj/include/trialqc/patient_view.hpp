#pragma once

#include "trialqc/records.hpp"

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace trialqc {

/// Non-owning per-patient projection of a StudyDataset. Valid while the dataset lives.
struct PatientView {
    const Patient* patient = nullptr;
    std::vector<const AdverseEvent*> adverse_events;
    std::vector<const ConcomitantMedication*> conmeds;
    std::vector<const LabResult*> labs;
    std::vector<const VitalSign*> vitals;
    std::vector<const ExposureRecord*> exposures; // sorted by start_day
    std::vector<const MedicalHistoryItem*> medical_history;
    std::vector<const Procedure*> procedures;

    const AdverseEvent* find_ae(std::string_view ae_id) const;
};

std::map<std::string, PatientView, std::less<>> index_by_patient(const StudyDataset& ds);

/// Throws NotFoundError for an unknown patient.
PatientView view_of(const StudyDataset& ds, std::string_view patient_id);

struct DoseChange {
    enum class Kind { reduction, interruption, withdrawal };
    Kind kind;
    StudyDay day;      // first day at the new dose / first day without drug
    std::string ex_id; // record that starts the reduced dose, or precedes the gap
};

/// Reductions (a record whose dose is below its predecessor's), interruptions (a gap
/// between consecutive records) and withdrawal (last record ends before `last_day`).
std::vector<DoseChange> dose_changes(const PatientView& p, StudyDay last_day);

std::vector<StudyDay> exposure_starts(const PatientView& p);

inline StudyDay effective_end(const AdverseEvent& ae, StudyDay last_day) { return ae.end_day.value_or(last_day); }

} // namespace trialqc
