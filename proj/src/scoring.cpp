#include "trialqc/error.hpp"
#include "trialqc/scoring.hpp"

#include <algorithm>
#include <map>

namespace trialqc::eval {

using nlohmann::json;

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json cm_json(const ConfusionMatrix& cm) {
    return json{{"tp", cm.tp}, {"fp", cm.fp}, {"fn", cm.fn}, {"tn", cm.tn}};
}

} // namespace

json metrics_json(const Metrics& m) {
    return json{{"accuracy", m.accuracy},   {"precision", opt(m.precision)},
                {"recall", opt(m.recall)},  {"f1", opt(m.f1)},
                {"error_rate", m.error_rate}, {"false_positive_rate", opt(m.false_positive_rate)}};
}

DetectionScore score_findings(const std::vector<detect::Finding>& findings,
                              const std::vector<synth::GroundTruthAnnotation>& truth, std::size_t eligible_points) {
    DetectionScore s;
    s.eligible_points = eligible_points;
    s.annotations = truth.size();
    std::map<std::string, const synth::GroundTruthAnnotation*> by_record;
    for (const auto& a : truth) {
        if (!by_record.emplace(a.record_id, &a).second)
            throw ValidationError("ground truth annotates record " + a.record_id + " twice");
        ++s.per_category.at(static_cast<std::size_t>(a.category - 1)).injected;
    }

    std::map<std::string, std::vector<const detect::Finding*>> by_primary;
    for (const auto& f : findings) {
        if (!f.category) {
            ++s.unverifiable;
            continue;
        }
        ++s.findings_scored;
        by_primary[f.primary_record()].push_back(&f);
    }
    std::int64_t correct = 0;
    for (const auto& [record, group] : by_primary) {
        auto it = by_record.find(record);
        if (it == by_record.end()) {
            ++s.cm.fp;
            for (const auto* f : group)
                s.false_positive_finding_ids.push_back(f->finding_id);
            continue;
        }
        ++s.cm.tp;
        auto& tally = s.per_category.at(static_cast<std::size_t>(it->second->category - 1));
        ++tally.detected;
        bool labelled = std::any_of(group.begin(), group.end(),
                                    [&](const auto* f) { return f->category == it->second->category; });
        if (labelled) {
            ++tally.correctly_labelled;
            ++correct;
        }
    }
    for (const auto& [record, a] : by_record)
        if (!by_primary.count(record))
            s.missed_record_ids.push_back(record);
    s.cm.fn = static_cast<std::int64_t>(s.missed_record_ids.size());
    s.cm.tn = std::max<std::int64_t>(0, static_cast<std::int64_t>(eligible_points) - s.cm.tp - s.cm.fp - s.cm.fn);
    std::sort(s.false_positive_finding_ids.begin(), s.false_positive_finding_ids.end());
    s.metrics = confusion_metrics(s.cm);
    if (s.cm.tp > 0)
        s.category_accuracy = static_cast<double>(correct) / static_cast<double>(s.cm.tp);
    return s;
}

json to_json(const DetectionScore& s) {
    json per = json::array();
    for (int c = 0; c < 6; ++c)
        per.push_back({{"category", c + 1},
                       {"injected", s.per_category[c].injected},
                       {"detected", s.per_category[c].detected},
                       {"correctly_labelled", s.per_category[c].correctly_labelled}});
    return json{{"confusion_matrix", cm_json(s.cm)},
                {"metrics", metrics_json(s.metrics)},
                {"eligible_points", s.eligible_points},
                {"annotations", s.annotations},
                {"findings_scored", s.findings_scored},
                {"unverifiable_findings", s.unverifiable},
                {"category_accuracy", opt(s.category_accuracy)},
                {"per_category", per},
                {"missed_record_ids", s.missed_record_ids},
                {"false_positive_finding_ids", s.false_positive_finding_ids}};
}

SessionScore score_session(const query::ReviewSession& s, const SessionTruth& truth) {
    SessionScore out;
    out.session_id = s.session_id;
    out.reviewer_id = s.reviewer_id;
    out.condition = s.condition;
    out.decisions = static_cast<int>(s.decisions.size());
    for (const auto& d : s.decisions) {
        const bool real = truth.discrepant.count(d.finding_id) > 0;
        if (!real && !truth.clean.count(d.finding_id))
            throw ValidationError("session " + s.session_id + ": finding " + d.finding_id +
                                  " is in neither the discrepant nor the clean set");
        const bool confirm = d.verdict == query::Verdict::confirm;
        if (real && confirm)
            ++out.cm.tp;
        else if (real)
            ++out.cm.fn;
        else if (confirm)
            ++out.cm.fp;
        else
            ++out.cm.tn;
    }
    out.throughput = static_cast<int>(out.cm.tp + out.cm.tn);
    if (out.cm.total() > 0)
        out.metrics = confusion_metrics(out.cm);
    if (s.ended_at)
        out.duration_ms = *s.ended_at - s.started_at;
    return out;
}

SessionReport score_sessions(const std::vector<query::ReviewSession>& sessions, const SessionTruth& truth) {
    SessionReport r;
    struct Acc {
        std::vector<double> baseline, assisted;
    };
    std::map<std::string, Acc> by_reviewer;
    for (const auto& s : sessions) {
        r.sessions.push_back(score_session(s, truth));
        auto& acc = by_reviewer[s.reviewer_id];
        (s.condition == query::Condition::baseline ? acc.baseline : acc.assisted)
            .push_back(r.sessions.back().throughput);
    }
    std::vector<double> base, assist, ratios;
    for (const auto& [id, acc] : by_reviewer) {
        if (acc.baseline.empty() || acc.assisted.empty())
            continue;
        ReviewerComparison c{id, mean(acc.baseline), mean(acc.assisted), std::nullopt};
        if (c.baseline > 0) {
            c.ratio = c.assisted / c.baseline;
            ratios.push_back(*c.ratio);
        }
        base.push_back(c.baseline);
        assist.push_back(c.assisted);
        r.reviewers.push_back(c);
    }
    if (!base.empty()) {
        r.mean_baseline = mean(base);
        r.mean_assisted = mean(assist);
        r.median_baseline = median(base);
        r.median_assisted = median(assist);
        if (*r.mean_baseline > 0)
            r.ratio_of_means = *r.mean_assisted / *r.mean_baseline;
    }
    if (!ratios.empty()) {
        r.mean_of_ratios = mean(ratios);
        r.median_of_ratios = median(ratios);
    }
    if (base.size() >= 2) {
        std::vector<double> diff(base.size());
        for (std::size_t i = 0; i < diff.size(); ++i)
            diff[i] = assist[i] - base[i];
        if (sample_sd(diff) > 0) {
            r.t_test = paired_t_test(base, assist);
            r.cohens_d = paired_cohens_d(diff);
        }
    }
    return r;
}

json to_json(const SessionReport& r) {
    json sessions = json::array();
    for (const auto& s : r.sessions) {
        json j{{"session_id", s.session_id},
               {"reviewer_id", s.reviewer_id},
               {"condition", query::to_string(s.condition)},
               {"confusion_matrix", cm_json(s.cm)},
               {"decisions", s.decisions},
               {"throughput", s.throughput}};
        j["metrics"] = s.metrics ? metrics_json(*s.metrics) : json(nullptr);
        j["duration_ms"] = s.duration_ms ? json(*s.duration_ms) : json(nullptr);
        sessions.push_back(j);
    }
    json reviewers = json::array();
    for (const auto& c : r.reviewers)
        reviewers.push_back(
            {{"reviewer_id", c.reviewer_id}, {"baseline", c.baseline}, {"assisted", c.assisted}, {"ratio", opt(c.ratio)}});
    json j{{"sessions", sessions},
           {"reviewers", reviewers},
           {"mean_baseline", opt(r.mean_baseline)},
           {"mean_assisted", opt(r.mean_assisted)},
           {"median_baseline", opt(r.median_baseline)},
           {"median_assisted", opt(r.median_assisted)},
           {"ratio_of_means", opt(r.ratio_of_means)},
           {"mean_of_ratios", opt(r.mean_of_ratios)},
           {"median_of_ratios", opt(r.median_of_ratios)},
           {"cohens_d", opt(r.cohens_d)}};
    j["paired_t_test"] = r.t_test ? json{{"t", r.t_test->t},
                                         {"df", r.t_test->df},
                                         {"p_two_sided", r.t_test->p_two_sided},
                                         {"mean_difference", r.t_test->mean_difference}}
                                  : json(nullptr);
    return j;
}

} // namespace trialqc::eval
