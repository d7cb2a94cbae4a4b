#include "trialqc/audit.hpp"

#include "trialqc/error.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>

namespace trialqc {

using nlohmann::json;

std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xF]);
    }
    return out;
}

namespace {
constexpr std::pair<AuditAction, std::string_view> kActions[] = {
    {AuditAction::dataset_imported, "dataset_imported"},
    {AuditAction::query_created, "query_created"},
    {AuditAction::query_edited, "query_edited"},
    {AuditAction::query_approved, "query_approved"},
    {AuditAction::query_rejected, "query_rejected"},
    {AuditAction::query_sent, "query_sent"},
    {AuditAction::query_answered, "query_answered"},
    {AuditAction::query_closed, "query_closed"},
    {AuditAction::session_started, "session_started"},
    {AuditAction::session_ended, "session_ended"},
    {AuditAction::decision_recorded, "decision_recorded"},
};
} // namespace

std::string_view to_string(AuditAction a) {
    for (const auto& [k, v] : kActions)
        if (k == a)
            return v;
    return "";
}

std::optional<AuditAction> parse_audit_action(std::string_view s) {
    for (const auto& [k, v] : kActions)
        if (v == s)
            return k;
    return std::nullopt;
}

void to_json(json& j, const AuditEntry& e) {
    j = json{{"timestamp", e.timestamp},
             {"actor", e.actor},
             {"action", to_string(e.action)},
             {"subject_id", e.subject_id},
             {"payload_digest", e.payload_digest}};
}

void from_json(const json& j, AuditEntry& e) {
    e.timestamp = j.at("timestamp").get<std::int64_t>();
    e.actor = j.at("actor").get<std::string>();
    auto action = parse_audit_action(j.at("action").get<std::string>());
    if (!action)
        throw ValidationError("unknown audit action " + j.at("action").dump());
    e.action = *action;
    e.subject_id = j.at("subject_id").get<std::string>();
    e.payload_digest = j.at("payload_digest").get<std::string>();
}

const AuditEntry& AuditLog::append(AuditEntry e) {
    auto it = last_by_subject_.find(e.subject_id);
    if (it != last_by_subject_.end() && e.timestamp < it->second)
        throw ConflictError("audit entry for " + e.subject_id + " at " + std::to_string(e.timestamp) +
                            " precedes last entry at " + std::to_string(it->second));
    last_by_subject_[e.subject_id] = e.timestamp;
    entries_.push_back(std::move(e));
    return entries_.back();
}

const AuditEntry& AuditLog::append(std::int64_t timestamp, std::string actor, AuditAction action,
                                   std::string subject_id, const json& payload) {
    return append(AuditEntry{timestamp, std::move(actor), action, std::move(subject_id), sha256_hex(payload.dump())});
}

std::vector<AuditEntry> AuditLog::for_subject(std::string_view subject_id) const {
    std::vector<AuditEntry> out;
    for (const auto& e : entries_)
        if (e.subject_id == subject_id)
            out.push_back(e);
    return out;
}

std::string AuditLog::digest() const {
    std::string chain(64, '0');
    for (const auto& e : entries_)
        chain = sha256_hex(chain + json(e).dump());
    return chain;
}

void AuditLog::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    for (const auto& e : entries_)
        out << json(e).dump() << '\n';
    if (!out)
        throw IoError("write failed: " + path.string());
}

AuditLog AuditLog::load(const std::filesystem::path& path) {
    AuditLog log;
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty())
            continue;
        try {
            log.append(json::parse(line).get<AuditEntry>());
        } catch (const json::exception& e) {
            throw ValidationError(path.filename().string() + ": line " + std::to_string(row) + ": " + e.what());
        }
    }
    return log;
}

} // namespace trialqc
