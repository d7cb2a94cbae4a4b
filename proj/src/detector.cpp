#include "trialqc/context.hpp"
#include "trialqc/dataset_io.hpp"
#include "trialqc/detector.hpp"
#include "trialqc/error.hpp"

#include <algorithm>
#include <future>
#include <set>
#include <tuple>

namespace trialqc::detect {

using nlohmann::json;

std::string_view to_string(Severity s) {
    switch (s) {
    case Severity::critical: return "critical";
    case Severity::major: return "major";
    case Severity::minor: return "minor";
    }
    return "?";
}

std::string_view to_string(Source s) {
    switch (s) {
    case Source::rule: return "rule";
    case Source::assistant: return "assistant";
    case Source::rule_assistant: return "rule+assistant";
    }
    return "?";
}

std::optional<Severity> parse_severity(std::string_view s) {
    for (auto v : {Severity::critical, Severity::major, Severity::minor})
        if (to_string(v) == s)
            return v;
    return std::nullopt;
}

namespace {

std::optional<Source> parse_source(std::string_view s) {
    for (auto v : {Source::rule, Source::assistant, Source::rule_assistant})
        if (to_string(v) == s)
            return v;
    return std::nullopt;
}

} // namespace

std::string_view category_label(int category) {
    switch (category) {
    case 1: return "Inappropriate concomitant medication to treat an adverse event";
    case 2: return "Timing of concomitant medication and adverse event do not align";
    case 3: return "Incorrect severity score for the adverse event description";
    case 4: return "Mismatched dosing change";
    case 5: return "Incorrect causality assessment of adverse event";
    case 6: return "No supporting data for adverse event";
    default: return "Unverifiable";
    }
}

void to_json(json& j, const AssistantVerdict& v) {
    j = json{{"agree", v.agree}, {"confidence", v.confidence}, {"rationale", v.rationale}};
    j["category"] = v.category ? json(*v.category) : json(nullptr);
}

void from_json(const json& j, AssistantVerdict& v) { v = parse_verdict(j); }

void to_json(json& j, const Finding& f) {
    j = json{{"finding_id", f.finding_id},
             {"patient_id", f.patient_id},
             {"record_ids", f.record_ids},
             {"severity", to_string(f.severity)},
             {"confidence", f.confidence},
             {"rationale", f.rationale},
             {"source", to_string(f.source)},
             {"significance", f.significance},
             {"facts", f.facts}};
    j["category"] = f.category ? json(*f.category) : json(nullptr);
    if (f.assistant)
        j["assistant"] = *f.assistant;
}

void from_json(const json& j, Finding& f) {
    try {
        f.finding_id = j.at("finding_id").get<std::string>();
        f.patient_id = j.at("patient_id").get<std::string>();
        f.record_ids = j.at("record_ids").get<std::vector<std::string>>();
        const auto& cat = j.at("category");
        f.category = cat.is_null() ? std::nullopt : std::optional<int>(cat.get<int>());
        auto sev = parse_severity(j.at("severity").get<std::string>());
        auto src = parse_source(j.value("source", "rule"));
        if (!sev || !src)
            throw ValidationError("finding " + f.finding_id + ": unknown severity or source");
        f.severity = *sev;
        f.source = *src;
        f.confidence = j.value("confidence", 0.0);
        f.rationale = j.value("rationale", "");
        f.significance = j.value("significance", 0.0);
        f.facts = j.value("facts", std::map<std::string, std::string>{});
        if (j.contains("assistant") && !j["assistant"].is_null())
            f.assistant = parse_verdict(j["assistant"]);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("finding: ") + e.what());
    }
    if (f.record_ids.empty())
        throw ValidationError("finding " + f.finding_id + ": evidence must not be empty");
    if (f.category && (*f.category < 1 || *f.category > 6))
        throw ValidationError("finding " + f.finding_id + ": category out of range 1–6");
    if (f.confidence < 0 || f.confidence > 1)
        throw ValidationError("finding " + f.finding_id + ": confidence out of range 0–1");
}

void sort_by_priority(std::vector<Finding>& findings) {
    std::sort(findings.begin(), findings.end(), [](const Finding& a, const Finding& b) {
        return std::make_tuple(a.severity, -a.significance, std::cref(a.patient_id), std::cref(a.finding_id)) <
               std::make_tuple(b.severity, -b.significance, std::cref(b.patient_id), std::cref(b.finding_id));
    });
}

namespace {

void score_significance(std::vector<Finding>& findings, const StudyDataset& ds, const kb::KnowledgeBase& kb) {
    auto views = index_by_patient(ds);
    std::map<std::string, context::Timeline, std::less<>> timelines;
    for (auto& f : findings) {
        auto it = views.find(f.patient_id);
        if (it == views.end())
            continue;
        const auto& view = it->second;
        auto tl = timelines.find(f.patient_id);
        if (tl == timelines.end())
            tl = timelines.emplace(f.patient_id, context::build_timeline(view)).first;
        double best = 0;
        for (const auto& id : f.record_ids) {
            if (const auto* lb = ds.find_lab(id))
                best = std::max(best, context::significance_score(*lb, view, tl->second, kb).score);
            else if (const auto* ae = ds.find_ae(id))
                best = std::max(best, std::min(100.0, 20.0 * ae->grade));
        }
        f.significance = best;
    }
}

void apply_verdict(Finding& f, const AssistantVerdict& v) {
    f.assistant = v;
    if (v.agree) {
        f.source = Source::rule_assistant;
        f.confidence = std::clamp(v.confidence, 0.0, 1.0);
    } else {
        f.confidence = std::clamp(1.0 - v.confidence, 0.0, 1.0);
    }
    if (!v.rationale.empty())
        f.rationale += " | assistant " + std::string(v.agree ? "agrees" : "disagrees") + ": " + v.rationale;
}

} // namespace

json assistant_request(const Finding& f, const StudyDataset& ds, const kb::KnowledgeBase& kb) {
    json records = json::array();
    for (const auto& id : f.record_ids) {
        if (const auto* r = ds.find_ae(id))
            records.push_back(json{{"domain", "adverse_events"}, {"record", json(*r)}});
        else if (const auto* r = ds.find_conmed(id))
            records.push_back(json{{"domain", "concomitant_medications"}, {"record", json(*r)}});
        else if (const auto* r = ds.find_lab(id))
            records.push_back(json{{"domain", "labs"}, {"record", json(*r)}});
        else if (const auto* r = ds.find_exposure(id))
            records.push_back(json{{"domain", "exposure"}, {"record", json(*r)}});
    }
    json timeline = json::array();
    if (ds.find_patient(f.patient_id))
        for (const auto& e : context::build_timeline(ds, f.patient_id).events)
            timeline.push_back(e);
    json facts = json::object();
    for (const auto& id : f.record_ids)
        if (const auto* ae = ds.find_ae(id))
            facts[id] = {{"normalized_term", kb.normalize_term(ae->term).value_or(ae->term)},
                         {"study_drug_toxicity", kb.is_study_drug_toxicity(ae->term)},
                         {"lab_gradeable", kb.grading_rule(ae->term) != nullptr}};
    return json{{"finding", f}, {"context", {{"records", records}, {"timeline", timeline}, {"kb_facts", facts}}}};
}

DetectionResult detect_all(const StudyDataset& ds, const kb::KnowledgeBase& kb, Assistant* assistant,
                           const DetectorConfig& cfg) {
    const auto& tol = cfg.tolerances;
    std::vector<Finding> all;
    auto add = [&](std::vector<Finding> v) { std::move(v.begin(), v.end(), std::back_inserter(all)); };
    add(check_conmed_indication(ds, kb, tol));
    add(check_conmed_timing(ds, tol));
    add(check_severity(ds, kb, tol));
    add(check_dose_action(ds, tol));
    add(check_causality(ds, kb, tol));
    add(check_supporting_data(ds, kb, tol));

    DetectionResult res;
    std::set<std::pair<int, std::string>> seen;
    for (auto& f : all)
        if (seen.emplace(f.category.value_or(0), f.primary_record()).second)
            res.findings.push_back(std::move(f));
    score_significance(res.findings, ds, kb);

    res.assistant_configured = assistant != nullptr;
    if (assistant && !res.findings.empty()) {
        std::vector<AssistantVerdict> verdicts(res.findings.size());
        const std::size_t limit = static_cast<std::size_t>(std::max(1, cfg.max_in_flight));
        try {
            for (std::size_t begin = 0; begin < res.findings.size(); begin += limit) {
                const std::size_t end = std::min(res.findings.size(), begin + limit);
                std::vector<std::future<AssistantVerdict>> batch;
                for (std::size_t i = begin; i < end; ++i)
                    batch.push_back(std::async(std::launch::async, [&, i] {
                        return assistant->adjudicate(assistant_request(res.findings[i], ds, kb));
                    }));
                for (std::size_t i = begin; i < end; ++i)
                    verdicts[i] = batch[i - begin].get();
            }
            for (std::size_t i = 0; i < res.findings.size(); ++i)
                apply_verdict(res.findings[i], verdicts[i]);
        } catch (const std::exception& e) {
            res.degraded = true;
            res.degraded_reason = e.what();
        }
    }
    sort_by_priority(res.findings);
    return res;
}

json to_json(const DetectionResult& r) {
    json j{{"findings", r.findings}};
    if (r.assistant_configured) {
        j["assistant"] = {{"configured", true}, {"degraded", r.degraded}};
        if (r.degraded)
            j["assistant"]["reason"] = r.degraded_reason;
    }
    return j;
}

DetectionResult detection_from_json(const json& j) {
    DetectionResult r;
    r.findings = j.at("findings").get<std::vector<Finding>>();
    if (j.contains("assistant")) {
        r.assistant_configured = true;
        r.degraded = j["assistant"].value("degraded", false);
        r.degraded_reason = j["assistant"].value("reason", "");
    }
    return r;
}

} // namespace trialqc::detect
