#pragma once

#include "trialqc/audit.hpp"
#include "trialqc/detector.hpp"
#include "trialqc/econ.hpp"
#include "trialqc/knowledge_base.hpp"
#include "trialqc/query.hpp"
#include "trialqc/synth.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>

namespace trialqc::service {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path data_dir = "trialqc-data";
    std::filesystem::path kb_path;
    std::filesystem::path template_dir;
    std::filesystem::path econ_params; // empty = built-in defaults
    std::optional<std::string> assistant_endpoint;
    int assistant_timeout_ms = 5000;

    static ServiceConfig from_json(const nlohmann::json& j);
    static ServiceConfig load(const std::filesystem::path& path);
    /// TRIALQC_PORT and TRIALQC_DATA_DIR override the file values.
    void apply_env();
    /// Throws ValidationError or IoError with the cause.
    void validate() const;
};

using Clock = std::function<std::int64_t()>;
std::int64_t system_clock_ms();

/// State behind the HTTP API: the active dataset with its findings, queries,
/// sessions and the audit trail. Readers run concurrently; mutations are serialized
/// and persisted (NDJSON under data_dir/store) before they return.
class ReviewService {
public:
    explicit ReviewService(ServiceConfig cfg, Clock clock = system_clock_ms);

    nlohmann::json list_datasets() const;
    /// Imports CRF files from `dir`, runs detection and replaces the active dataset.
    /// `truth` optionally names a ground-truth file for the evaluation report.
    nlohmann::json import_dataset(const std::filesystem::path& dir, const std::string& reviewer_id,
                                  const std::optional<std::filesystem::path>& truth = std::nullopt,
                                  const std::string& name = "");

    nlohmann::json patient_profile(const std::string& patient_id) const;
    /// Priority order, or finding id order when `priority` is false.
    nlohmann::json findings(bool priority = true) const;
    nlohmann::json finding(const std::string& finding_id) const;

    nlohmann::json create_query(const std::string& finding_id, const std::string& reviewer_id);
    nlohmann::json transition_query(const std::string& query_id, const std::string& action,
                                    const std::string& reviewer_id, const std::optional<std::string>& text);
    nlohmann::json get_query(const std::string& query_id) const;
    nlohmann::json list_queries() const;

    nlohmann::json create_session(const std::string& reviewer_id, const std::string& condition);
    nlohmann::json record_decision(const std::string& session_id, const std::string& finding_id,
                                   const std::string& verdict, const std::string& reviewer_id);
    nlohmann::json end_session(const std::string& session_id, const std::string& reviewer_id);
    nlohmann::json get_session(const std::string& session_id) const;

    nlohmann::json eval_report() const;
    nlohmann::json econ_report() const;

    nlohmann::json audit_entries() const;
    void flush() const;

    const ServiceConfig& config() const noexcept { return cfg_; }

private:
    void require_reviewer(const std::string& reviewer_id) const;
    void require_dataset() const;
    const detect::Finding& find_finding(const std::string& id) const;
    void persist_locked() const;
    void load_store();

    ServiceConfig cfg_;
    Clock clock_;
    kb::KnowledgeBase kb_;
    query::TemplateSet templates_;
    econ::EconParams econ_;

    mutable std::shared_mutex mu_;
    std::optional<StudyDataset> dataset_;
    std::string dataset_name_;
    std::string dataset_path_;
    std::int64_t imported_at_ = 0;
    std::optional<std::vector<synth::GroundTruthAnnotation>> truth_;
    std::size_t eligible_points_ = 0;
    detect::DetectionResult detection_;
    std::map<std::string, query::ReviewQuery> queries_;
    std::map<std::string, query::ReviewSession> sessions_;
    AuditLog audit_;
    int next_session_ = 1;
};

} // namespace trialqc::service
