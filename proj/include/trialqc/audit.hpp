#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace trialqc {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

enum class AuditAction {
    dataset_imported,
    query_created,
    query_edited,
    query_approved,
    query_rejected,
    query_sent,
    query_answered,
    query_closed,
    session_started,
    session_ended,
    decision_recorded,
};

std::string_view to_string(AuditAction a);
std::optional<AuditAction> parse_audit_action(std::string_view s);

struct AuditEntry {
    std::int64_t timestamp = 0; // milliseconds
    std::string actor;
    AuditAction action = AuditAction::dataset_imported;
    std::string subject_id;
    std::string payload_digest;

    friend bool operator==(const AuditEntry&, const AuditEntry&) = default;
};

void to_json(nlohmann::json& j, const AuditEntry& e);
void from_json(const nlohmann::json& j, AuditEntry& e);

/// Append-only audit trail. Entries for one subject must arrive in
/// non-decreasing timestamp order; nothing is ever modified or removed.
/// Single writer: callers serialize concurrent appends.
class AuditLog {
public:
    /// Throws ConflictError when `e` is older than the subject's last entry.
    const AuditEntry& append(AuditEntry e);

    /// Convenience: digests `payload` and appends.
    const AuditEntry& append(std::int64_t timestamp, std::string actor, AuditAction action, std::string subject_id,
                             const nlohmann::json& payload);

    const std::vector<AuditEntry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    std::vector<AuditEntry> for_subject(std::string_view subject_id) const;

    /// Hash chain over every entry in order.
    std::string digest() const;

    /// Writes one JSON object per line.
    void save(const std::filesystem::path& path) const;
    static AuditLog load(const std::filesystem::path& path);

private:
    std::vector<AuditEntry> entries_;
    std::map<std::string, std::int64_t, std::less<>> last_by_subject_;
};

} // namespace trialqc
