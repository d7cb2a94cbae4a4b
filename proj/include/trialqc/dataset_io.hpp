#pragma once

#include "trialqc/records.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string_view>
#include <vector>

namespace trialqc {

enum class ColumnType { string, integer, number, boolean, enumeration };

struct ColumnSpec {
    std::string_view name;
    ColumnType type;
    bool nullable = false;
    std::vector<std::string_view> allowed = {}; // enumeration values
};

/// Column layout of one domain file, in file order.
const std::vector<ColumnSpec>& columns(Domain d);

/// Machine-readable data dictionary covering all eight domain files.
nlohmann::json data_dictionary();

std::string file_name(Domain d, std::string_view extension = "csv");

/// Reads one file per domain from `dir`. `<domain>.csv` is preferred; `<domain>.ndjson`
/// is accepted when no CSV exists. Populates provenance and validates the result.
StudyDataset import_dataset(const std::filesystem::path& dir);

enum class ExportFormat { csv, ndjson };

/// Writes all eight domain files in canonical record order, creating `dir` if needed.
void export_dataset(const StudyDataset& ds, const std::filesystem::path& dir, ExportFormat fmt = ExportFormat::csv);

void to_json(nlohmann::json& j, const Patient& r);
void to_json(nlohmann::json& j, const AdverseEvent& r);
void to_json(nlohmann::json& j, const ConcomitantMedication& r);
void to_json(nlohmann::json& j, const LabResult& r);
void to_json(nlohmann::json& j, const VitalSign& r);
void to_json(nlohmann::json& j, const ExposureRecord& r);
void to_json(nlohmann::json& j, const MedicalHistoryItem& r);
void to_json(nlohmann::json& j, const Procedure& r);

void from_json(const nlohmann::json& j, Patient& r);
void from_json(const nlohmann::json& j, AdverseEvent& r);
void from_json(const nlohmann::json& j, ConcomitantMedication& r);
void from_json(const nlohmann::json& j, LabResult& r);
void from_json(const nlohmann::json& j, VitalSign& r);
void from_json(const nlohmann::json& j, ExposureRecord& r);
void from_json(const nlohmann::json& j, MedicalHistoryItem& r);
void from_json(const nlohmann::json& j, Procedure& r);

} // namespace trialqc
