#include "trialqc/context.hpp"
#include "trialqc/dataset_io.hpp"
#include "trialqc/error.hpp"
#include "trialqc/resources.hpp"
#include "trialqc/scoring.hpp"
#include "trialqc/service.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>

namespace trialqc::service {

namespace fs = std::filesystem;
using nlohmann::json;

std::int64_t system_clock_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

ServiceConfig ServiceConfig::from_json(const json& j) {
    ServiceConfig c;
    try {
        c.host = j.value("host", c.host);
        c.port = j.value("port", c.port);
        c.data_dir = j.value("data_dir", c.data_dir.string());
        c.kb_path = j.value("kb_path", std::string());
        c.template_dir = j.value("template_dir", std::string());
        c.econ_params = j.value("econ_params", std::string());
        if (j.contains("assistant") && j["assistant"].is_object()) {
            const auto& a = j["assistant"];
            if (a.contains("endpoint") && !a["endpoint"].is_null())
                c.assistant_endpoint = a["endpoint"].get<std::string>();
            c.assistant_timeout_ms = a.value("timeout_ms", c.assistant_timeout_ms);
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("service config: ") + e.what());
    }
    return c;
}

ServiceConfig ServiceConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot read service config: " + path.string());
    try {
        return from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void ServiceConfig::apply_env() {
    if (const char* p = std::getenv("TRIALQC_PORT"); p && *p) {
        try {
            port = std::stoi(p);
        } catch (const std::exception&) {
            throw ValidationError(std::string("TRIALQC_PORT is not a port number: ") + p);
        }
    }
    if (const char* d = std::getenv("TRIALQC_DATA_DIR"); d && *d)
        data_dir = d;
}

void ServiceConfig::validate() const {
    if (port < 0 || port > 65535)
        throw ValidationError("port out of range: " + std::to_string(port));
    if (assistant_timeout_ms <= 0)
        throw ValidationError("assistant timeout must be positive");
    const fs::path kb = kb_path.empty() ? resource_dir() / "knowledge_base.json" : kb_path;
    if (!fs::exists(kb))
        throw IoError("knowledge base not found: " + kb.string());
    if (!template_dir.empty() && !fs::is_directory(template_dir))
        throw IoError("template directory not found: " + template_dir.string());
    if (!econ_params.empty() && !fs::exists(econ_params))
        throw IoError("economic parameter file not found: " + econ_params.string());
    std::error_code ec;
    fs::create_directories(data_dir, ec);
    if (ec || !fs::is_directory(data_dir))
        throw IoError("data directory unusable: " + data_dir.string() + (ec ? " (" + ec.message() + ")" : ""));
}

namespace {

json read_json(const fs::path& p) {
    std::ifstream in(p);
    if (!in)
        throw IoError("cannot read " + p.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(p.string() + ": " + e.what());
    }
}

template <class T>
std::vector<T> read_ndjson(const fs::path& p) {
    std::vector<T> out;
    std::ifstream in(p);
    if (!in)
        return out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty())
            continue;
        try {
            out.push_back(json::parse(line).get<T>());
        } catch (const json::exception& e) {
            throw ValidationError(p.string() + ": line " + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

template <class Map>
void write_ndjson(const fs::path& p, const Map& m) {
    const fs::path tmp = p.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out)
            throw IoError("cannot write " + tmp.string());
        for (const auto& [id, v] : m)
            out << json(v).dump() << '\n';
    }
    fs::rename(tmp, p);
}

} // namespace

ReviewService::ReviewService(ServiceConfig cfg, Clock clock) : cfg_(std::move(cfg)), clock_(std::move(clock)) {
    cfg_.validate();
    kb_ = kb::KnowledgeBase::load(cfg_.kb_path.empty() ? resource_dir() / "knowledge_base.json" : cfg_.kb_path);
    templates_ = cfg_.template_dir.empty() ? query::TemplateSet::defaults() : query::TemplateSet::load(cfg_.template_dir);
    if (!cfg_.econ_params.empty())
        econ_ = econ::EconParams::load(cfg_.econ_params);
    load_store();
}

void ReviewService::load_store() {
    const fs::path store = cfg_.data_dir / "store";
    if (fs::exists(store / "audit.ndjson"))
        audit_ = AuditLog::load(store / "audit.ndjson");
    for (auto& q : read_ndjson<query::ReviewQuery>(store / "queries.ndjson"))
        queries_.emplace(q.query_id, std::move(q));
    for (auto& s : read_ndjson<query::ReviewSession>(store / "sessions.ndjson"))
        sessions_.emplace(s.session_id, std::move(s));
    next_session_ = static_cast<int>(sessions_.size()) + 1;
    const fs::path meta_path = store / "dataset.json";
    if (!fs::exists(meta_path))
        return;
    const json meta = read_json(meta_path);
    dataset_ = trialqc::import_dataset(cfg_.data_dir / "dataset");
    dataset_name_ = meta.value("name", "");
    dataset_path_ = meta.value("source", "");
    imported_at_ = meta.value("imported_at", std::int64_t{0});
    eligible_points_ = synth::eligible_points(*dataset_);
    if (fs::exists(store / "truth.json"))
        truth_ = synth::truth_from_json(read_json(store / "truth.json"));
    if (fs::exists(store / "findings.json"))
        detection_ = detect::detection_from_json(read_json(store / "findings.json"));
    else
        detection_ = detect::detect_all(*dataset_, kb_);
}

void ReviewService::persist_locked() const {
    const fs::path store = cfg_.data_dir / "store";
    fs::create_directories(store);
    write_ndjson(store / "queries.ndjson", queries_);
    write_ndjson(store / "sessions.ndjson", sessions_);
    audit_.save(store / "audit.ndjson");
}

void ReviewService::flush() const {
    std::shared_lock lock(mu_);
    persist_locked();
}

void ReviewService::require_reviewer(const std::string& reviewer_id) const {
    if (reviewer_id.empty())
        throw ValidationError("reviewer_id is required");
}

void ReviewService::require_dataset() const {
    if (!dataset_)
        throw NotFoundError("no dataset imported");
}

const detect::Finding& ReviewService::find_finding(const std::string& id) const {
    require_dataset();
    for (const auto& f : detection_.findings)
        if (f.finding_id == id)
            return f;
    throw NotFoundError("unknown finding " + id);
}

json ReviewService::list_datasets() const {
    std::shared_lock lock(mu_);
    json list = json::array();
    if (dataset_)
        list.push_back({{"name", dataset_name_},
                        {"source", dataset_path_},
                        {"imported_at", imported_at_},
                        {"patients", dataset_->patients.size()},
                        {"records", dataset_->record_count()},
                        {"eligible_points", eligible_points_},
                        {"findings", detection_.findings.size()},
                        {"has_truth", truth_.has_value()}});
    return json{{"datasets", list}};
}

json ReviewService::import_dataset(const fs::path& dir, const std::string& reviewer_id,
                                   const std::optional<fs::path>& truth, const std::string& name) {
    require_reviewer(reviewer_id);
    StudyDataset ds = trialqc::import_dataset(dir);
    std::optional<std::vector<synth::GroundTruthAnnotation>> annotations;
    if (truth)
        annotations = synth::truth_from_json(read_json(*truth));
    std::unique_ptr<detect::Assistant> assistant;
    if (cfg_.assistant_endpoint)
        assistant = std::make_unique<detect::HttpAssistant>(*cfg_.assistant_endpoint,
                                                            std::chrono::milliseconds(cfg_.assistant_timeout_ms));
    auto detection = detect::detect_all(ds, kb_, assistant.get());

    std::unique_lock lock(mu_);
    const std::int64_t now = clock_();
    const fs::path store = cfg_.data_dir / "store";
    fs::create_directories(store);
    const fs::path copy = cfg_.data_dir / "dataset";
    fs::remove_all(copy);
    export_dataset(ds, copy);
    dataset_name_ = name.empty() ? dir.filename().string() : name;
    dataset_path_ = fs::absolute(dir).string();
    imported_at_ = now;
    {
        std::ofstream meta(store / "dataset.json", std::ios::trunc);
        meta << json{{"name", dataset_name_}, {"source", dataset_path_}, {"imported_at", now}}.dump() << '\n';
    }
    {
        std::ofstream f(store / "findings.json", std::ios::trunc);
        f << detect::to_json(detection).dump() << '\n';
    }
    if (annotations) {
        std::ofstream t(store / "truth.json", std::ios::trunc);
        t << json{{"annotations", *annotations}}.dump() << '\n';
    } else {
        fs::remove(store / "truth.json");
    }
    eligible_points_ = synth::eligible_points(ds);
    dataset_ = std::move(ds);
    truth_ = std::move(annotations);
    detection_ = std::move(detection);
    audit_.append(now, reviewer_id, AuditAction::dataset_imported, dataset_name_,
                  {{"source", dataset_path_}, {"records", dataset_->record_count()}});
    persist_locked();
    json out{{"name", dataset_name_},
             {"patients", dataset_->patients.size()},
             {"records", dataset_->record_count()},
             {"findings", detection_.findings.size()}};
    if (detection_.assistant_configured)
        out["assistant"] = detect::to_json(detection_)["assistant"];
    return out;
}

json ReviewService::patient_profile(const std::string& patient_id) const {
    std::shared_lock lock(mu_);
    require_dataset();
    auto view = view_of(*dataset_, patient_id);
    auto timeline = context::build_timeline(view);
    auto list = [](const auto& ptrs) {
        json a = json::array();
        for (const auto* p : ptrs)
            a.push_back(*p);
        return a;
    };
    json finding_ids = json::array();
    for (const auto& f : detection_.findings)
        if (f.patient_id == patient_id)
            finding_ids.push_back(f.finding_id);
    json hf = nullptr;
    if (auto flag = context::detect_pattern_heart_failure(timeline))
        hf = *flag;
    return json{{"patient", *view.patient},
                {"timeline", timeline.events},
                {"adverse_events", list(view.adverse_events)},
                {"concomitant_medications", list(view.conmeds)},
                {"labs", list(view.labs)},
                {"vitals", list(view.vitals)},
                {"exposure", list(view.exposures)},
                {"medical_history", list(view.medical_history)},
                {"procedures", list(view.procedures)},
                {"findings", finding_ids},
                {"patterns", hf.is_null() ? json::array() : json::array({hf})}};
}

json ReviewService::findings(bool priority) const {
    std::shared_lock lock(mu_);
    require_dataset();
    auto list = detection_.findings;
    if (!priority)
        std::sort(list.begin(), list.end(),
                  [](const auto& a, const auto& b) { return a.finding_id < b.finding_id; });
    return json{{"findings", list}};
}

json ReviewService::finding(const std::string& finding_id) const {
    std::shared_lock lock(mu_);
    const auto& f = find_finding(finding_id);
    json j = f;
    j["category_label"] = detect::category_label(f.category.value_or(0));
    j["suggested_query"] = templates_.render(f);
    j["evidence"] = detect::assistant_request(f, *dataset_, kb_)["context"]["records"];
    return j;
}

json ReviewService::create_query(const std::string& finding_id, const std::string& reviewer_id) {
    require_reviewer(reviewer_id);
    std::unique_lock lock(mu_);
    const auto& f = find_finding(finding_id);
    auto q = query::suggest_query(f, templates_);
    if (queries_.count(q.query_id))
        throw ConflictError("query " + q.query_id + " already exists for finding " + finding_id);
    audit_.append(clock_(), reviewer_id, AuditAction::query_created, q.query_id,
                  {{"finding_id", finding_id}, {"site_text", q.site_text}});
    queries_.emplace(q.query_id, q);
    persist_locked();
    return q;
}

json ReviewService::transition_query(const std::string& query_id, const std::string& action,
                                     const std::string& reviewer_id, const std::optional<std::string>& text) {
    require_reviewer(reviewer_id);
    auto a = query::parse_action(action);
    if (!a)
        throw ValidationError("unknown query action '" + action + "'");
    std::unique_lock lock(mu_);
    auto it = queries_.find(query_id);
    if (it == queries_.end())
        throw NotFoundError("unknown query " + query_id);
    auto t = query::transition(it->second, *a, reviewer_id, clock_(), text);
    audit_.append(t.audit);
    it->second = std::move(t.query);
    persist_locked();
    return it->second;
}

json ReviewService::get_query(const std::string& query_id) const {
    std::shared_lock lock(mu_);
    auto it = queries_.find(query_id);
    if (it == queries_.end())
        throw NotFoundError("unknown query " + query_id);
    return it->second;
}

json ReviewService::list_queries() const {
    std::shared_lock lock(mu_);
    json list = json::array();
    for (const auto& [id, q] : queries_)
        list.push_back(q);
    return json{{"queries", list}};
}

json ReviewService::create_session(const std::string& reviewer_id, const std::string& condition) {
    require_reviewer(reviewer_id);
    auto c = query::parse_condition(condition);
    if (!c)
        throw ValidationError("condition must be baseline or assisted");
    std::unique_lock lock(mu_);
    std::string id;
    do {
        char buf[16];
        std::snprintf(buf, sizeof buf, "S%04d", next_session_++);
        id = buf;
    } while (sessions_.count(id));
    auto s = query::start_session(id, reviewer_id, *c, clock_());
    audit_.append(s.started_at, reviewer_id, AuditAction::session_started, id, {{"condition", condition}});
    sessions_.emplace(id, s);
    persist_locked();
    return s;
}

json ReviewService::record_decision(const std::string& session_id, const std::string& finding_id,
                                    const std::string& verdict, const std::string& reviewer_id) {
    require_reviewer(reviewer_id);
    auto v = query::parse_verdict(verdict);
    if (!v)
        throw ValidationError("verdict must be confirm or dismiss");
    std::unique_lock lock(mu_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end())
        throw NotFoundError("unknown session " + session_id);
    if (it->second.reviewer_id != reviewer_id)
        throw ConflictError("session " + session_id + " belongs to reviewer " + it->second.reviewer_id);
    find_finding(finding_id);
    const std::int64_t now = clock_();
    auto updated = query::record_decision(it->second, finding_id, *v, now);
    audit_.append(now, reviewer_id, AuditAction::decision_recorded, session_id,
                  {{"finding_id", finding_id}, {"verdict", verdict}});
    it->second = std::move(updated);
    persist_locked();
    return it->second;
}

json ReviewService::end_session(const std::string& session_id, const std::string& reviewer_id) {
    require_reviewer(reviewer_id);
    std::unique_lock lock(mu_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end())
        throw NotFoundError("unknown session " + session_id);
    const std::int64_t now = clock_();
    auto updated = query::end_session(it->second, now);
    audit_.append(now, reviewer_id, AuditAction::session_ended, session_id, json::object());
    it->second = std::move(updated);
    persist_locked();
    return it->second;
}

json ReviewService::get_session(const std::string& session_id) const {
    std::shared_lock lock(mu_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end())
        throw NotFoundError("unknown session " + session_id);
    return it->second;
}

json ReviewService::eval_report() const {
    std::shared_lock lock(mu_);
    json report{{"detection", nullptr}, {"sessions", nullptr}};
    if (!dataset_ || !truth_)
        return report;
    report["detection"] = eval::to_json(eval::score_findings(detection_.findings, *truth_, eligible_points_));
    eval::SessionTruth st;
    std::set<std::string> annotated;
    for (const auto& a : *truth_)
        annotated.insert(a.record_id);
    for (const auto& f : detection_.findings)
        (annotated.count(f.primary_record()) ? st.discrepant : st.clean).insert(f.finding_id);
    std::vector<query::ReviewSession> sessions;
    for (const auto& [id, s] : sessions_)
        sessions.push_back(s);
    report["sessions"] = eval::to_json(eval::score_sessions(sessions, st));
    return report;
}

json ReviewService::econ_report() const { return econ::to_json(econ::total_report(econ_)); }

json ReviewService::audit_entries() const {
    std::shared_lock lock(mu_);
    return json{{"entries", audit_.entries()}, {"digest", audit_.digest()}};
}

} // namespace trialqc::service
