#include "trialqc/error.hpp"
#include "trialqc/query.hpp"

#include <fstream>
#include <sstream>

namespace trialqc::query {

using nlohmann::json;

std::string_view to_string(QueryState s) {
    switch (s) {
    case QueryState::draft: return "draft";
    case QueryState::approved: return "approved";
    case QueryState::sent: return "sent";
    case QueryState::answered: return "answered";
    case QueryState::closed: return "closed";
    case QueryState::rejected: return "rejected";
    }
    return "?";
}

std::string_view to_string(QueryAction a) {
    switch (a) {
    case QueryAction::edit: return "edit";
    case QueryAction::approve: return "approve";
    case QueryAction::reject: return "reject";
    case QueryAction::send: return "send";
    case QueryAction::answer: return "answer";
    case QueryAction::close: return "close";
    }
    return "?";
}

std::optional<QueryState> parse_state(std::string_view s) {
    for (auto v : kAllStates)
        if (to_string(v) == s)
            return v;
    return std::nullopt;
}

std::optional<QueryAction> parse_action(std::string_view s) {
    for (auto v : kAllActions)
        if (to_string(v) == s)
            return v;
    return std::nullopt;
}

std::optional<QueryState> next_state(QueryState s, QueryAction a) {
    using S = QueryState;
    using A = QueryAction;
    switch (s) {
    case S::draft:
        if (a == A::edit)
            return S::draft;
        if (a == A::approve)
            return S::approved;
        if (a == A::reject)
            return S::rejected;
        break;
    case S::approved:
        if (a == A::send)
            return S::sent;
        break;
    case S::sent:
        if (a == A::answer)
            return S::answered;
        break;
    case S::answered:
        if (a == A::close)
            return S::closed;
        if (a == A::send)
            return S::sent;
        break;
    case S::closed:
    case S::rejected:
        break;
    }
    return std::nullopt;
}

bool is_terminal(QueryState s) { return s == QueryState::closed || s == QueryState::rejected; }

AuditAction audit_action(QueryAction a) {
    switch (a) {
    case QueryAction::edit: return AuditAction::query_edited;
    case QueryAction::approve: return AuditAction::query_approved;
    case QueryAction::reject: return AuditAction::query_rejected;
    case QueryAction::send: return AuditAction::query_sent;
    case QueryAction::answer: return AuditAction::query_answered;
    case QueryAction::close: return AuditAction::query_closed;
    }
    return AuditAction::query_edited;
}

void to_json(json& j, const ReviewQuery& q) {
    json edits = json::array();
    for (const auto& e : q.edits)
        edits.push_back({{"timestamp", e.timestamp},
                         {"actor", e.actor},
                         {"previous_text", e.previous_text},
                         {"new_text", e.new_text}});
    j = json{{"query_id", q.query_id},     {"finding_id", q.finding_id}, {"patient_id", q.patient_id},
             {"record_ids", q.record_ids}, {"site_text", q.site_text},   {"state", to_string(q.state)},
             {"edits", edits}};
}

void from_json(const json& j, ReviewQuery& q) {
    try {
        q.query_id = j.at("query_id").get<std::string>();
        q.finding_id = j.at("finding_id").get<std::string>();
        q.patient_id = j.value("patient_id", "");
        q.record_ids = j.value("record_ids", std::vector<std::string>{});
        q.site_text = j.at("site_text").get<std::string>();
        auto st = parse_state(j.at("state").get<std::string>());
        if (!st)
            throw ValidationError("query " + q.query_id + ": unknown state");
        q.state = *st;
        q.edits.clear();
        for (const auto& e : j.value("edits", json::array()))
            q.edits.push_back({e.at("timestamp").get<std::int64_t>(), e.at("actor").get<std::string>(),
                               e.at("previous_text").get<std::string>(), e.at("new_text").get<std::string>()});
    } catch (const json::exception& e) {
        throw ValidationError(std::string("query: ") + e.what());
    }
}

// ---------------------------------------------------------------------------

namespace {

const char* const kDefaults[] = {
    "The indication of {{drug}} for {{ae_term}} could not be verified against the reference list. Please confirm "
    "the medication name. Records: {{evidence}}.",
    "Concomitant medication {{drug}} is recorded as treatment for {{ae_term}}, but it is not an accepted therapy for "
    "this event. Please verify the medication name and its indication, or correct the link to the adverse event. "
    "Records: {{evidence}}.",
    "{{drug}} started on day {{cm_start}}, {{gap_days}} days {{relation}} ({{ae_term}}, days {{ae_start}} to "
    "{{ae_end}}). Please confirm the medication start date and the adverse event dates. Records: {{evidence}}.",
    "{{ae_term}} is coded as grade {{coded_grade}}, but {{basis}} indicates grade {{expected_grade}}. Please review "
    "the severity grade against the source documents. Records: {{evidence}}.",
    "Action taken for {{ae_term}} is recorded as {{action}}, but dosing records show {{exposure_detail}} (expected: "
    "{{expected_change}}). Please reconcile the adverse event action with the exposure records. Records: "
    "{{evidence}}.",
    "{{ae_term}} is assessed as {{causality}}, but {{basis}}. Please review the causality assessment. Records: "
    "{{evidence}}.",
    "No abnormal {{analyte}} result was found within {{window}} days of the onset of {{ae_term}}. Please provide "
    "supporting laboratory data or review the event term. Records: {{evidence}}.",
};

std::string join(const std::vector<std::string>& v, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i)
            out += sep;
        out += v[i];
    }
    return out;
}

} // namespace

TemplateSet TemplateSet::defaults() {
    TemplateSet t;
    for (int c = 0; c <= 6; ++c)
        t.set(c, kDefaults[c]);
    return t;
}

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw IoError("template directory not found: " + dir.string());
    TemplateSet t = defaults();
    for (int c = 0; c <= 6; ++c) {
        auto path = dir / (c == 0 ? std::string("unverifiable.txt") : "category_" + std::to_string(c) + ".txt");
        std::ifstream in(path);
        if (!in)
            continue;
        std::stringstream ss;
        ss << in.rdbuf();
        std::string text = ss.str();
        while (!text.empty() && (text.back() == '\n' || text.back() == '\r'))
            text.pop_back();
        t.set(c, std::move(text));
    }
    return t;
}

void TemplateSet::set(int category, std::string text) {
    if (category < 0 || category > 6)
        throw ValidationError("template category out of range 0–6");
    texts_[category] = std::move(text);
}

const std::string& TemplateSet::text(int category) const {
    auto it = texts_.find(category);
    if (it == texts_.end())
        throw NotFoundError("no template for category " + std::to_string(category));
    return it->second;
}

std::string TemplateSet::render(const detect::Finding& f) const {
    std::map<std::string, std::string> values = f.facts;
    values["finding_id"] = f.finding_id;
    values["patient_id"] = f.patient_id;
    values["category_label"] = std::string(detect::category_label(f.category.value_or(0)));
    values["evidence"] = join(f.record_ids, ", ");

    const std::string& tpl = text(f.category.value_or(0));
    std::string out;
    std::size_t pos = 0;
    while (true) {
        auto open = tpl.find("{{", pos);
        if (open == std::string::npos) {
            out.append(tpl, pos);
            break;
        }
        auto close = tpl.find("}}", open);
        if (close == std::string::npos)
            throw ValidationError("template: unterminated placeholder");
        out.append(tpl, pos, open - pos);
        std::string key = tpl.substr(open + 2, close - open - 2);
        auto it = values.find(key);
        if (it == values.end())
            throw ValidationError("template placeholder '" + key + "' has no value in finding " + f.finding_id);
        out += it->second;
        pos = close + 2;
    }
    std::vector<std::string> missing;
    for (const auto& id : f.record_ids)
        if (out.find(id) == std::string::npos)
            missing.push_back(id);
    if (!missing.empty())
        out += " Records: " + join(missing, ", ") + ".";
    return out;
}

std::string query_id_for(const detect::Finding& f) { return "Q-" + f.finding_id; }

ReviewQuery suggest_query(const detect::Finding& f, const TemplateSet& templates) {
    ReviewQuery q;
    q.query_id = query_id_for(f);
    q.finding_id = f.finding_id;
    q.patient_id = f.patient_id;
    q.record_ids = f.record_ids;
    q.site_text = templates.render(f);
    return q;
}

Transition transition(const ReviewQuery& q, QueryAction action, const std::string& actor, std::int64_t timestamp,
                      const std::optional<std::string>& text) {
    if (actor.empty())
        throw ValidationError("transition requires an actor");
    auto next = next_state(q.state, action);
    if (!next)
        throw ConflictError("illegal transition: query " + q.query_id + " in state '" +
                            std::string(to_string(q.state)) + "' does not allow '" + std::string(to_string(action)) +
                            "'");
    ReviewQuery updated = q;
    json payload{{"query_id", q.query_id},
                 {"action", to_string(action)},
                 {"from", to_string(q.state)},
                 {"to", to_string(*next)}};
    if (action == QueryAction::edit) {
        if (!text)
            throw ValidationError("edit requires the new query text");
        updated.edits.push_back({timestamp, actor, q.site_text, *text});
        updated.site_text = *text;
        payload["text"] = *text;
    }
    updated.state = *next;
    AuditEntry entry{timestamp, actor, audit_action(action), q.query_id, sha256_hex(payload.dump())};
    return {std::move(updated), std::move(entry)};
}

QueryState replay_state(const std::vector<AuditEntry>& entries) {
    std::optional<QueryState> state;
    for (const auto& e : entries) {
        if (e.action == AuditAction::query_created) {
            state = QueryState::draft;
            continue;
        }
        if (!state)
            throw ValidationError("audit replay: " + e.subject_id + " has entries before its creation");
        std::optional<QueryAction> action;
        for (auto a : kAllActions)
            if (audit_action(a) == e.action)
                action = a;
        if (!action)
            continue;
        auto next = next_state(*state, *action);
        if (!next)
            throw ValidationError("audit replay: illegal " + std::string(to_string(*action)) + " from " +
                                  std::string(to_string(*state)));
        state = next;
    }
    if (!state)
        throw NotFoundError("audit replay: no creation entry");
    return *state;
}

} // namespace trialqc::query
