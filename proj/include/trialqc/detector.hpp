#pragma once

#include "trialqc/knowledge_base.hpp"
#include "trialqc/records.hpp"
#include "trialqc/tolerances.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace trialqc::detect {

// Declaration order is priority order (critical first).
enum class Severity { critical, major, minor };
enum class Source { rule, assistant, rule_assistant };

std::string_view to_string(Severity s);
std::string_view to_string(Source s);
std::optional<Severity> parse_severity(std::string_view s);

std::string_view category_label(int category);

struct AssistantVerdict {
    bool agree = false;
    std::optional<int> category;
    double confidence = 0;
    std::string rationale;

    friend bool operator==(const AssistantVerdict&, const AssistantVerdict&) = default;
};

struct Finding {
    std::string finding_id;
    std::string patient_id;
    std::vector<std::string> record_ids; // evidence; the first is the primary record
    std::optional<int> category;         // empty for "unverifiable"
    Severity severity = Severity::minor;
    double confidence = 0;
    std::string rationale;
    Source source = Source::rule;
    double significance = 0;
    std::map<std::string, std::string> facts; // template values
    std::optional<AssistantVerdict> assistant;

    const std::string& primary_record() const { return record_ids.front(); }

    friend bool operator==(const Finding&, const Finding&) = default;
};

void to_json(nlohmann::json& j, const Finding& f);
void from_json(const nlohmann::json& j, Finding& f);
void to_json(nlohmann::json& j, const AssistantVerdict& v);
void from_json(const nlohmann::json& j, AssistantVerdict& v);

std::vector<Finding> check_conmed_indication(const StudyDataset& ds, const kb::KnowledgeBase& kb,
                                             const Tolerances& tol = {});
std::vector<Finding> check_conmed_timing(const StudyDataset& ds, const Tolerances& tol = {});
std::vector<Finding> check_severity(const StudyDataset& ds, const kb::KnowledgeBase& kb, const Tolerances& tol = {});
std::vector<Finding> check_dose_action(const StudyDataset& ds, const Tolerances& tol = {});
std::vector<Finding> check_causality(const StudyDataset& ds, const kb::KnowledgeBase& kb,
                                     const Tolerances& tol = {});
std::vector<Finding> check_supporting_data(const StudyDataset& ds, const kb::KnowledgeBase& kb,
                                           const Tolerances& tol = {});

/// Second opinion on a rule finding. Implementations throw on any transport or
/// protocol failure.
class Assistant {
public:
    virtual ~Assistant() = default;
    virtual AssistantVerdict adjudicate(const nlohmann::json& request) = 0;
};

/// POST {endpoint}/adjudicate with {finding, context}.
class HttpAssistant : public Assistant {
public:
    HttpAssistant(std::string endpoint, std::chrono::milliseconds timeout);
    AssistantVerdict adjudicate(const nlohmann::json& request) override;

private:
    std::string endpoint_;
    std::chrono::milliseconds timeout_;
};

/// Offline stand-in: agrees with every categorized finding.
class StubAssistant : public Assistant {
public:
    AssistantVerdict adjudicate(const nlohmann::json& request) override;
};

/// Validates and decodes an adjudication response body.
AssistantVerdict parse_verdict(const nlohmann::json& body);

struct DetectorConfig {
    Tolerances tolerances;
    int max_in_flight = 4;
};

struct DetectionResult {
    std::vector<Finding> findings;
    bool assistant_configured = false;
    bool degraded = false;
    std::string degraded_reason;
};

/// Context bundle sent to the assistant for one finding.
nlohmann::json assistant_request(const Finding& f, const StudyDataset& ds, const kb::KnowledgeBase& kb);

/// Runs all checks, deduplicates on (category, primary record), optionally adjudicates,
/// and sorts by (severity, significance desc, patient_id, finding_id).
DetectionResult detect_all(const StudyDataset& ds, const kb::KnowledgeBase& kb, Assistant* assistant = nullptr,
                           const DetectorConfig& cfg = {});

void sort_by_priority(std::vector<Finding>& findings);

nlohmann::json to_json(const DetectionResult& r);
DetectionResult detection_from_json(const nlohmann::json& j);

} // namespace trialqc::detect
