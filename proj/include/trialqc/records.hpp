#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace trialqc {

// Study days are integers; day 1 is the first study-drug dose, negative days are pre-treatment.
using StudyDay = int;

enum class Sex { female, male };

enum class Causality { related, possibly_related, not_related };

enum class ActionTaken { none, dose_reduced, dose_interrupted, drug_withdrawn };

enum class Analyte { hemoglobin, platelets, neutrophils, alt, ast, bilirubin, creatinine, potassium, bnp };

struct Patient {
    std::string patient_id;
    int age = 0;
    Sex sex = Sex::female;
    StudyDay enrollment_day = 1;

    friend bool operator==(const Patient&, const Patient&) = default;
};

struct AdverseEvent {
    std::string ae_id;
    std::string patient_id;
    std::string term;
    std::string narrative;
    int grade = 1;
    StudyDay start_day = 1;
    std::optional<StudyDay> end_day; // absent = ongoing
    Causality causality = Causality::not_related;
    ActionTaken action_taken = ActionTaken::none;
    bool serious = false;

    friend bool operator==(const AdverseEvent&, const AdverseEvent&) = default;
};

struct ConcomitantMedication {
    std::string cm_id;
    std::string patient_id;
    std::string drug_name;
    std::string indication_text;
    std::optional<std::string> linked_ae_id;
    StudyDay start_day = 1;
    std::optional<StudyDay> end_day;
    std::string dose_text;

    friend bool operator==(const ConcomitantMedication&, const ConcomitantMedication&) = default;
};

struct LabResult {
    std::string lab_id;
    std::string patient_id;
    Analyte analyte = Analyte::hemoglobin;
    double value = 0.0;
    std::string units;
    StudyDay collection_day = 1;
    double normal_low = 0.0;
    double normal_high = 0.0;

    friend bool operator==(const LabResult&, const LabResult&) = default;
};

struct VitalSign {
    std::string vs_id;
    std::string patient_id;
    StudyDay day = 1;
    double weight_kg = 0.0;
    int systolic_bp = 0;
    int diastolic_bp = 0;

    friend bool operator==(const VitalSign&, const VitalSign&) = default;
};

struct ExposureRecord {
    std::string ex_id;
    std::string patient_id;
    double dose_mg = 0.0;
    StudyDay start_day = 1;
    StudyDay end_day = 1;

    friend bool operator==(const ExposureRecord&, const ExposureRecord&) = default;
};

struct MedicalHistoryItem {
    std::string mh_id;
    std::string patient_id;
    std::string condition;
    bool pre_study = true;

    friend bool operator==(const MedicalHistoryItem&, const MedicalHistoryItem&) = default;
};

struct Procedure {
    std::string pr_id;
    std::string patient_id;
    std::string name;
    StudyDay day = 1;

    friend bool operator==(const Procedure&, const Procedure&) = default;
};

/// Where an ingested record came from.
struct Provenance {
    std::string source_file;
    std::size_t row = 0; // 1-based data row, header excluded

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// The eight CRF domains, in canonical file order.
enum class Domain {
    demographics,
    adverse_events,
    concomitant_medications,
    labs,
    vitals,
    exposure,
    medical_history,
    procedures,
};

inline constexpr Domain kAllDomains[] = {
    Domain::demographics, Domain::adverse_events, Domain::concomitant_medications, Domain::labs,
    Domain::vitals,       Domain::exposure,       Domain::medical_history,         Domain::procedures,
};

struct StudyDataset {
    std::vector<Patient> patients;
    std::vector<AdverseEvent> adverse_events;
    std::vector<ConcomitantMedication> conmeds;
    std::vector<LabResult> labs;
    std::vector<VitalSign> vitals;
    std::vector<ExposureRecord> exposures;
    std::vector<MedicalHistoryItem> medical_history;
    std::vector<Procedure> procedures;
    std::map<std::string, Provenance> provenance;

    std::size_t record_count() const;
    /// Last study day observed on any dated record; ongoing AEs extend to it.
    StudyDay last_observed_day() const;

    const Patient* find_patient(std::string_view id) const;
    const AdverseEvent* find_ae(std::string_view id) const;
    const ConcomitantMedication* find_conmed(std::string_view id) const;
    const LabResult* find_lab(std::string_view id) const;
    const ExposureRecord* find_exposure(std::string_view id) const;
};

/// Record-set equality ignoring record order and provenance.
bool same_records(const StudyDataset& a, const StudyDataset& b);

/// Sorts every domain by record id; the canonical order used for export.
void sort_canonical(StudyDataset& ds);

/// Checks field invariants, id uniqueness, exposure overlap and foreign keys.
/// Throws ValidationError or IntegrityError.
void validate(const StudyDataset& ds);

std::string_view to_string(Sex v);
std::string_view to_string(Causality v);
std::string_view to_string(ActionTaken v);
std::string_view to_string(Analyte v);
std::string_view to_string(Domain v);
std::string_view default_units(Analyte v);

std::optional<Sex> parse_sex(std::string_view s);
std::optional<Causality> parse_causality(std::string_view s);
std::optional<ActionTaken> parse_action(std::string_view s);
std::optional<Analyte> parse_analyte(std::string_view s);

} // namespace trialqc
