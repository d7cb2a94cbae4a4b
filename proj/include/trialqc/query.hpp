#pragma once

#include "trialqc/audit.hpp"
#include "trialqc/detector.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace trialqc::query {

enum class QueryState { draft, approved, sent, answered, closed, rejected };
enum class QueryAction { edit, approve, reject, send, answer, close };

inline constexpr QueryState kAllStates[] = {QueryState::draft, QueryState::approved, QueryState::sent,
                                            QueryState::answered, QueryState::closed, QueryState::rejected};
inline constexpr QueryAction kAllActions[] = {QueryAction::edit, QueryAction::approve, QueryAction::reject,
                                              QueryAction::send, QueryAction::answer, QueryAction::close};

std::string_view to_string(QueryState s);
std::string_view to_string(QueryAction a);
std::optional<QueryState> parse_state(std::string_view s);
std::optional<QueryAction> parse_action(std::string_view s);

/// The transition table; nullopt when `a` is not allowed in `s`.
std::optional<QueryState> next_state(QueryState s, QueryAction a);
bool is_terminal(QueryState s);
AuditAction audit_action(QueryAction a);

struct QueryEdit {
    std::int64_t timestamp = 0;
    std::string actor;
    std::string previous_text;
    std::string new_text;

    friend bool operator==(const QueryEdit&, const QueryEdit&) = default;
};

struct ReviewQuery {
    std::string query_id;
    std::string finding_id;
    std::string patient_id;
    std::vector<std::string> record_ids;
    std::string site_text;
    QueryState state = QueryState::draft;
    std::vector<QueryEdit> edits;

    friend bool operator==(const ReviewQuery&, const ReviewQuery&) = default;
};

void to_json(nlohmann::json& j, const ReviewQuery& q);
void from_json(const nlohmann::json& j, ReviewQuery& q);

/// Query wording per category, with {{name}} placeholders filled from finding facts
/// plus finding_id, patient_id, category_label and evidence.
class TemplateSet {
public:
    /// Built-in wording, identical to the shipped template files.
    static TemplateSet defaults();
    /// Reads category_1.txt .. category_6.txt and unverifiable.txt; missing files keep
    /// the built-in wording.
    static TemplateSet load(const std::filesystem::path& dir);

    void set(int category, std::string text); // 0 = unverifiable
    const std::string& text(int category) const;

    /// Throws ValidationError for a placeholder the finding cannot fill.
    std::string render(const detect::Finding& f) const;

private:
    std::map<int, std::string> texts_;
};

std::string query_id_for(const detect::Finding& f);

/// Draft query for a finding. Deterministic; every evidence record id appears in the text.
ReviewQuery suggest_query(const detect::Finding& f, const TemplateSet& templates);

struct Transition {
    ReviewQuery query;
    AuditEntry audit;
};

/// Applies `action`. `text` is required for edit and ignored otherwise.
/// Throws ConflictError naming state and action when the table forbids it.
Transition transition(const ReviewQuery& q, QueryAction action, const std::string& actor, std::int64_t timestamp,
                      const std::optional<std::string>& text = std::nullopt);

/// Rebuilds a query's state from its audit entries (creation first).
QueryState replay_state(const std::vector<AuditEntry>& entries);

// ---------------------------------------------------------------------------
// Review sessions

enum class Condition { baseline, assisted };
enum class Verdict { confirm, dismiss };

std::string_view to_string(Condition c);
std::string_view to_string(Verdict v);
std::optional<Condition> parse_condition(std::string_view s);
std::optional<Verdict> parse_verdict(std::string_view s);

struct Decision {
    std::string finding_id;
    Verdict verdict = Verdict::confirm;
    std::int64_t timestamp = 0;

    friend bool operator==(const Decision&, const Decision&) = default;
};

struct ReviewSession {
    std::string session_id;
    std::string reviewer_id;
    Condition condition = Condition::baseline;
    std::int64_t started_at = 0;
    std::optional<std::int64_t> ended_at;
    std::vector<Decision> decisions;

    bool decided(std::string_view finding_id) const;

    friend bool operator==(const ReviewSession&, const ReviewSession&) = default;
};

void to_json(nlohmann::json& j, const ReviewSession& s);
void from_json(const nlohmann::json& j, ReviewSession& s);

ReviewSession start_session(std::string session_id, std::string reviewer_id, Condition condition,
                            std::int64_t started_at);

/// Throws ConflictError on a duplicate finding or an ended session, ValidationError
/// when `timestamp` precedes the previous decision or the session start.
ReviewSession record_decision(const ReviewSession& s, const std::string& finding_id, Verdict verdict,
                              std::int64_t timestamp);

ReviewSession end_session(const ReviewSession& s, std::int64_t ended_at);

} // namespace trialqc::query
