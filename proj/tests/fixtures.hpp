#pragma once

#include "trialqc/knowledge_base.hpp"
#include "trialqc/records.hpp"
#include "trialqc/synth.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unistd.h>

namespace trialqc::test {

namespace fs = std::filesystem;

inline fs::path data_dir() { return TRIALQC_TEST_DATA; }
inline std::string cli_path() { return TRIALQC_CLI_PATH; }

inline const kb::KnowledgeBase& shipped_kb() {
    static const auto k = kb::KnowledgeBase::load(data_dir() / "knowledge_base.json");
    return k;
}

inline const synth::ElementLibrary& shipped_library() {
    static const auto lib = synth::ElementLibrary::load(data_dir() / "element_library.json");
    return lib;
}

/// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("trialqc-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

// Record builders for hand-made fixtures. Patient "P001" unless stated.

inline Patient patient(std::string id = "P001") { return {std::move(id), 55, Sex::female, 1}; }

inline AdverseEvent adverse_event(std::string id, std::string term, int grade, StudyDay start,
                                  std::optional<StudyDay> end, Causality causality = Causality::not_related,
                                  ActionTaken action = ActionTaken::none, std::string narrative = "",
                                  std::string pid = "P001") {
    AdverseEvent ae;
    ae.ae_id = std::move(id);
    ae.patient_id = std::move(pid);
    ae.term = std::move(term);
    ae.narrative = std::move(narrative);
    ae.grade = grade;
    ae.start_day = start;
    ae.end_day = end;
    ae.causality = causality;
    ae.action_taken = action;
    return ae;
}

inline ConcomitantMedication conmed(std::string id, std::string drug, std::optional<std::string> linked_ae,
                                    StudyDay start, std::optional<StudyDay> end, std::string indication = "",
                                    std::string pid = "P001") {
    ConcomitantMedication cm;
    cm.cm_id = std::move(id);
    cm.patient_id = std::move(pid);
    cm.drug_name = std::move(drug);
    cm.indication_text = std::move(indication);
    cm.linked_ae_id = std::move(linked_ae);
    cm.start_day = start;
    cm.end_day = end;
    cm.dose_text = "1 tablet daily";
    return cm;
}

inline LabResult lab(std::string id, Analyte a, double value, StudyDay day, std::string pid = "P001") {
    const auto& range = shipped_kb().reference_range(a);
    LabResult lb;
    lb.lab_id = std::move(id);
    lb.patient_id = std::move(pid);
    lb.analyte = a;
    lb.value = value;
    lb.units = range.units;
    lb.collection_day = day;
    lb.normal_low = range.low;
    lb.normal_high = range.high;
    return lb;
}

inline VitalSign vital(std::string id, StudyDay day, double weight, std::string pid = "P001") {
    return {std::move(id), std::move(pid), day, weight, 120, 80};
}

inline ExposureRecord exposure(std::string id, double dose, StudyDay start, StudyDay end, std::string pid = "P001") {
    return {std::move(id), std::move(pid), dose, start, end};
}

inline MedicalHistoryItem history(std::string id, std::string condition, bool pre_study = true,
                                  std::string pid = "P001") {
    return {std::move(id), std::move(pid), std::move(condition), pre_study};
}

/// One patient dosed at 100 mg on days 1-84.
inline StudyDataset single_patient() {
    StudyDataset ds;
    ds.patients.push_back(patient());
    ds.exposures.push_back(exposure("EX001", 100, 1, 84));
    return ds;
}

} // namespace trialqc::test
