#include "trialqc/error.hpp"
#include "trialqc/query.hpp"

#include <algorithm>

namespace trialqc::query {

using nlohmann::json;

std::string_view to_string(Condition c) { return c == Condition::baseline ? "baseline" : "assisted"; }
std::string_view to_string(Verdict v) { return v == Verdict::confirm ? "confirm" : "dismiss"; }

std::optional<Condition> parse_condition(std::string_view s) {
    if (s == "baseline")
        return Condition::baseline;
    if (s == "assisted")
        return Condition::assisted;
    return std::nullopt;
}

std::optional<Verdict> parse_verdict(std::string_view s) {
    if (s == "confirm")
        return Verdict::confirm;
    if (s == "dismiss")
        return Verdict::dismiss;
    return std::nullopt;
}

bool ReviewSession::decided(std::string_view finding_id) const {
    return std::any_of(decisions.begin(), decisions.end(), [&](const Decision& d) { return d.finding_id == finding_id; });
}

void to_json(json& j, const ReviewSession& s) {
    json decisions = json::array();
    for (const auto& d : s.decisions)
        decisions.push_back({{"finding_id", d.finding_id}, {"verdict", to_string(d.verdict)}, {"timestamp", d.timestamp}});
    j = json{{"session_id", s.session_id},
             {"reviewer_id", s.reviewer_id},
             {"condition", to_string(s.condition)},
             {"started_at", s.started_at},
             {"decisions", decisions}};
    j["ended_at"] = s.ended_at ? json(*s.ended_at) : json(nullptr);
}

void from_json(const json& j, ReviewSession& s) {
    try {
        s.session_id = j.at("session_id").get<std::string>();
        s.reviewer_id = j.at("reviewer_id").get<std::string>();
        auto c = parse_condition(j.at("condition").get<std::string>());
        if (!c)
            throw ValidationError("session " + s.session_id + ": condition must be baseline or assisted");
        s.condition = *c;
        s.started_at = j.at("started_at").get<std::int64_t>();
        s.ended_at.reset();
        if (j.contains("ended_at") && !j["ended_at"].is_null())
            s.ended_at = j["ended_at"].get<std::int64_t>();
        s.decisions.clear();
        for (const auto& d : j.value("decisions", json::array())) {
            auto v = parse_verdict(d.at("verdict").get<std::string>());
            if (!v)
                throw ValidationError("session " + s.session_id + ": verdict must be confirm or dismiss");
            s.decisions.push_back({d.at("finding_id").get<std::string>(), *v, d.at("timestamp").get<std::int64_t>()});
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("session: ") + e.what());
    }
}

ReviewSession start_session(std::string session_id, std::string reviewer_id, Condition condition,
                            std::int64_t started_at) {
    if (session_id.empty() || reviewer_id.empty())
        throw ValidationError("session id and reviewer id are required");
    ReviewSession s;
    s.session_id = std::move(session_id);
    s.reviewer_id = std::move(reviewer_id);
    s.condition = condition;
    s.started_at = started_at;
    return s;
}

ReviewSession record_decision(const ReviewSession& s, const std::string& finding_id, Verdict verdict,
                              std::int64_t timestamp) {
    if (s.ended_at)
        throw ConflictError("session " + s.session_id + " has ended");
    if (s.decided(finding_id))
        throw ConflictError("finding " + finding_id + " already decided in session " + s.session_id);
    const std::int64_t floor = s.decisions.empty() ? s.started_at : s.decisions.back().timestamp;
    if (timestamp < floor)
        throw ValidationError("decision timestamp precedes the previous event in session " + s.session_id);
    ReviewSession out = s;
    out.decisions.push_back({finding_id, verdict, timestamp});
    return out;
}

ReviewSession end_session(const ReviewSession& s, std::int64_t ended_at) {
    if (s.ended_at)
        throw ConflictError("session " + s.session_id + " has already ended");
    const std::int64_t floor = s.decisions.empty() ? s.started_at : s.decisions.back().timestamp;
    if (ended_at < floor)
        throw ValidationError("session end precedes its last decision");
    ReviewSession out = s;
    out.ended_at = ended_at;
    return out;
}

} // namespace trialqc::query
