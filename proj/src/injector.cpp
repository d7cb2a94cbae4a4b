#include "trialqc/dataset_io.hpp"
#include "trialqc/error.hpp"
#include "trialqc/patient_view.hpp"
#include "trialqc/synth.hpp"

#include "record_patch.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace trialqc::synth {

using nlohmann::json;

void to_json(json& j, const GroundTruthAnnotation& a) {
    j = json{{"record_id", a.record_id},
             {"patient_id", a.patient_id},
             {"category", a.category},
             {"transform", a.transform},
             {"original_value", a.original_value},
             {"corrupted_value", a.corrupted_value}};
}

void from_json(const json& j, GroundTruthAnnotation& a) {
    a.record_id = j.at("record_id").get<std::string>();
    a.patient_id = j.at("patient_id").get<std::string>();
    a.category = j.at("category").get<int>();
    if (a.category < 1 || a.category > kCategoryCount)
        throw ValidationError("annotation " + a.record_id + ": category out of range 1–6");
    a.transform = j.value("transform", "");
    a.original_value = j.at("original_value");
    a.corrupted_value = j.at("corrupted_value");
}

std::size_t eligible_points(const StudyDataset& ds) {
    return ds.adverse_events.size() + ds.conmeds.size() + ds.exposures.size() + ds.labs.size();
}

std::array<int, kCategoryCount> allocate(int total, const std::array<double, kCategoryCount>& weights) {
    std::array<int, kCategoryCount> out{};
    double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(sum > 0))
        throw ValidationError("category weights must include a positive value");
    for (double w : weights)
        if (w < 0)
            throw ValidationError("category weights must be non-negative");
    std::array<double, kCategoryCount> rem{};
    int assigned = 0;
    for (int c = 0; c < kCategoryCount; ++c) {
        double exact = total * weights[c] / sum;
        out[c] = static_cast<int>(std::floor(exact));
        rem[c] = exact - out[c];
        assigned += out[c];
    }
    std::array<int, kCategoryCount> order;
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
    for (int i = 0; assigned < total; ++i, ++assigned)
        ++out[order[i % kCategoryCount]];
    return out;
}

namespace {

struct Candidate {
    std::string record_id;
    bool exposure = false;
};

class Injector {
public:
    Injector(const StudyDataset& clean, const kb::KnowledgeBase& kb, const InjectionPlan& plan)
        : work_(clean), kb_(kb), plan_(plan), tol_(plan.tolerances), rng_(plan.seed),
          last_day_(clean.last_observed_day()) {}

    InjectionResult run() {
        InjectionResult res;
        if (!(plan_.rate >= 0.0 && plan_.rate <= 1.0))
            throw ValidationError("injection rate must be within [0, 1]");
        res.eligible_points = eligible_points(work_);
        const int target = static_cast<int>(std::llround(plan_.rate * static_cast<double>(res.eligible_points)));
        res.requested = allocate(target, plan_.category_weights);
        if (target > 0 && target < kCategoryCount)
            res.warnings.push_back("only " + std::to_string(target) +
                                   " discrepancies requested; stratification across six categories is partial");

        std::array<std::vector<Candidate>, kCategoryCount> cands;
        for (const auto& cm : work_.conmeds) {
            if (!cm.linked_ae_id)
                continue;
            cands[0].push_back({cm.cm_id});
            cands[1].push_back({cm.cm_id});
        }
        for (const auto& ae : work_.adverse_events) {
            cands[2].push_back({ae.ae_id});
            cands[3].push_back({ae.ae_id});
            cands[4].push_back({ae.ae_id});
            cands[5].push_back({ae.ae_id});
        }
        for (const auto& ex : work_.exposures)
            cands[3].push_back({ex.ex_id, true});
        for (auto& c : cands)
            rng_.shuffle(c);

        std::array<int, kCategoryCount> order;
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return cands[a].size() < cands[b].size(); });

        std::array<std::size_t, kCategoryCount> cursor{};
        std::array<int, kCategoryCount> done{};
        bool progress = true;
        while (progress) {
            progress = false;
            for (int c : order) {
                if (done[c] >= res.requested[c])
                    continue;
                while (cursor[c] < cands[c].size()) {
                    const auto& cand = cands[c][cursor[c]++];
                    if (used_.count(cand.record_id))
                        continue;
                    if (auto a = try_apply(c + 1, cand)) {
                        used_.insert(a->record_id);
                        res.truth.push_back(std::move(*a));
                        ++done[c];
                        progress = true;
                        break;
                    }
                }
            }
        }
        for (int c = 0; c < kCategoryCount; ++c)
            if (done[c] < res.requested[c])
                res.warnings.push_back("category " + std::to_string(c + 1) + ": requested " +
                                       std::to_string(res.requested[c]) + ", injected " + std::to_string(done[c]) +
                                       " (not enough eligible records)");
        std::sort(res.truth.begin(), res.truth.end(), [](const auto& a, const auto& b) {
            return std::tie(a.category, a.record_id) < std::tie(b.category, b.record_id);
        });
        sort_canonical(work_);
        res.corrupted = std::move(work_);
        return res;
    }

private:
    std::optional<GroundTruthAnnotation> try_apply(int category, const Candidate& cand) {
        switch (category) {
        case 1: return swap_drug(cand.record_id);
        case 2: return shift_conmed(cand.record_id);
        case 3: return rewrite_grade(cand.record_id);
        case 4: return cand.exposure ? reduce_without_action(cand.record_id) : action_without_change(cand.record_id);
        case 5: return falsify_causality(cand.record_id);
        default: return remove_support(cand.record_id);
        }
    }

    AdverseEvent* ae(const std::string& id) {
        for (auto& r : work_.adverse_events)
            if (r.ae_id == id)
                return &r;
        return nullptr;
    }
    ConcomitantMedication* conmed(const std::string& id) {
        for (auto& r : work_.conmeds)
            if (r.cm_id == id)
                return &r;
        return nullptr;
    }
    ExposureRecord* exposure(const std::string& id) {
        for (auto& r : work_.exposures)
            if (r.ex_id == id)
                return &r;
        return nullptr;
    }

    GroundTruthAnnotation annotate(const std::string& record_id, const std::string& patient_id, int category,
                                   std::string transform, json original, json corrupted) {
        return {record_id, patient_id, category, std::move(transform), std::move(original), std::move(corrupted)};
    }

    /// Abnormal labs of the rule's analyte within `window` days of `day`, nearest first.
    std::vector<const LabResult*> supporting_labs(const std::string& pid, const kb::GradingRule& rule, StudyDay day,
                                                  int window) const {
        std::vector<const LabResult*> out;
        for (const auto& lb : work_.labs)
            if (lb.patient_id == pid && lb.analyte == rule.analyte && std::abs(lb.collection_day - day) <= window &&
                kb::KnowledgeBase::grade_with(rule, lb.value).graded())
                out.push_back(&lb);
        std::stable_sort(out.begin(), out.end(), [&](auto* a, auto* b) {
            int da = std::abs(a->collection_day - day), db = std::abs(b->collection_day - day);
            return std::tie(da, a->lab_id) < std::tie(db, b->lab_id);
        });
        return out;
    }

    bool reduction_near(const std::string& pid, StudyDay day) const {
        auto view = view_of(work_, pid);
        for (const auto& ch : dose_changes(view, last_day_))
            if (ch.kind == DoseChange::Kind::reduction && std::abs(ch.day - day) <= tol_.dose_change_days)
                return true;
        return false;
    }

    std::optional<GroundTruthAnnotation> swap_drug(const std::string& id) {
        auto* cm = conmed(id);
        const auto* linked = cm && cm->linked_ae_id ? ae(*cm->linked_ae_id) : nullptr;
        if (!linked || kb_.indicated_for(cm->drug_name, linked->term) != kb::Indication::indicated)
            return std::nullopt;
        std::vector<std::string> options;
        for (const auto& [name, mono] : kb_.drugs())
            if (!mono.treats_nothing && kb_.indicated_for(name, linked->term) == kb::Indication::not_indicated)
                options.push_back(name);
        if (options.empty())
            return std::nullopt;
        auto replacement = options[rng_.below(options.size())];
        auto a = annotate(id, cm->patient_id, 1, "swap_drug_not_indicated", {{"drug_name", cm->drug_name}},
                          {{"drug_name", replacement}});
        cm->drug_name = replacement;
        return a;
    }

    std::optional<GroundTruthAnnotation> shift_conmed(const std::string& id) {
        auto* cm = conmed(id);
        const auto* linked = cm && cm->linked_ae_id ? ae(*cm->linked_ae_id) : nullptr;
        if (!linked)
            return std::nullopt;
        const int tol = tol_.conmed_timing_days;
        if (cm->start_day < linked->start_day - tol || cm->start_day > effective_end(*linked, last_day_) + tol)
            return std::nullopt;
        StudyDay shifted = linked->start_day - tol - rng_.uniform_int(1, 7);
        auto a = annotate(id, cm->patient_id, 2, "shift_conmed_start", {{"start_day", cm->start_day}},
                          {{"start_day", shifted}});
        cm->start_day = shifted;
        return a;
    }

    std::optional<GroundTruthAnnotation> rewrite_grade(const std::string& id) {
        auto* e = ae(id);
        if (!e || e->grade >= 5)
            return std::nullopt;
        int cue = kb_.narrative_min_grade(e->narrative);
        if (cue > e->grade)
            return std::nullopt;
        int new_grade = 0;
        if (const auto* rule = kb_.grading_rule(e->term)) {
            auto labs = supporting_labs(e->patient_id, *rule, e->start_day, tol_.lab_match_days);
            if (labs.empty())
                return std::nullopt;
            int lab_grade = kb::KnowledgeBase::grade_with(*rule, labs.front()->value).grade;
            if (lab_grade != e->grade)
                return std::nullopt;
            new_grade = lab_grade >= 2 ? 1 : 3;
        } else if (e->grade >= 2 && cue >= 2) {
            new_grade = 1;
        } else {
            return std::nullopt;
        }
        auto a = annotate(id, e->patient_id, 3, "rewrite_grade", {{"grade", e->grade}}, {{"grade", new_grade}});
        e->grade = new_grade;
        return a;
    }

    std::optional<GroundTruthAnnotation> action_without_change(const std::string& id) {
        auto* e = ae(id);
        if (!e || e->action_taken != ActionTaken::none || reduction_near(e->patient_id, e->start_day))
            return std::nullopt;
        auto a = annotate(id, e->patient_id, 4, "action_without_exposure_change", {{"action_taken", "none"}},
                          {{"action_taken", "dose_reduced"}});
        e->action_taken = ActionTaken::dose_reduced;
        return a;
    }

    std::optional<GroundTruthAnnotation> reduce_without_action(const std::string& id) {
        auto* ex = exposure(id);
        if (!ex || !(ex->dose_mg > 0))
            return std::nullopt;
        const ExposureRecord* prev = nullptr;
        const ExposureRecord* next = nullptr;
        for (const auto& other : work_.exposures) {
            if (other.patient_id != ex->patient_id)
                continue;
            if (other.end_day + 1 == ex->start_day)
                prev = &other;
            if (ex->end_day + 1 == other.start_day)
                next = &other;
        }
        // Halving must add a reduction without masking the successor's existing one.
        if (!prev || prev->dose_mg != ex->dose_mg || (next && next->dose_mg < ex->dose_mg))
            return std::nullopt;
        for (const auto& other : work_.adverse_events)
            if (other.patient_id == ex->patient_id && other.action_taken == ActionTaken::dose_reduced &&
                std::abs(other.start_day - ex->start_day) <= tol_.dose_change_days)
                return std::nullopt;
        double reduced = ex->dose_mg / 2.0;
        auto a = annotate(id, ex->patient_id, 4, "exposure_change_without_action", {{"dose_mg", ex->dose_mg}},
                          {{"dose_mg", reduced}});
        ex->dose_mg = reduced;
        return a;
    }

    std::optional<GroundTruthAnnotation> falsify_causality(const std::string& id) {
        auto* e = ae(id);
        if (!e)
            return std::nullopt;
        auto view = view_of(work_, e->patient_id);
        auto starts = exposure_starts(view);
        if (starts.empty())
            return std::nullopt;
        bool near_dose = std::any_of(starts.begin(), starts.end(), [&](StudyDay s) {
            int lag = e->start_day - s;
            return lag >= 0 && lag <= tol_.causality_days;
        });
        if (kb_.is_study_drug_toxicity(e->term) && near_dose && e->causality != Causality::not_related) {
            auto a = annotate(id, e->patient_id, 5, "deny_causality_of_known_toxicity",
                              {{"causality", to_string(e->causality)}}, {{"causality", "not_related"}});
            e->causality = Causality::not_related;
            return a;
        }
        StudyDay first = *std::min_element(starts.begin(), starts.end());
        bool has_conmed = std::any_of(work_.conmeds.begin(), work_.conmeds.end(),
                                      [&](const auto& cm) { return cm.linked_ae_id == e->ae_id; });
        if (kb_.grading_rule(e->term) || has_conmed || e->action_taken != ActionTaken::none || e->start_day < first)
            return std::nullopt;
        StudyDay moved = first - rng_.uniform_int(1, 7);
        auto a = annotate(id, e->patient_id, 5, "related_before_first_dose",
                          {{"start_day", e->start_day}, {"causality", to_string(e->causality)}},
                          {{"start_day", moved}, {"causality", "related"}});
        e->start_day = moved;
        e->causality = Causality::related;
        return a;
    }

    std::optional<GroundTruthAnnotation> remove_support(const std::string& id) {
        auto* e = ae(id);
        if (!e)
            return std::nullopt;
        const auto* rule = kb_.grading_rule(e->term);
        if (!rule)
            return std::nullopt;
        for (const auto& other : work_.adverse_events) {
            if (other.patient_id != e->patient_id || other.ae_id == e->ae_id)
                continue;
            if (const auto* r = kb_.grading_rule(other.term); r && r->analyte == rule->analyte)
                return std::nullopt;
        }
        const int window = tol_.supporting_lab_days;
        if (supporting_labs(e->patient_id, *rule, e->start_day, window).empty())
            return std::nullopt;
        json restore = json::array();
        json removed = json::array();
        std::vector<LabResult> kept;
        for (auto& lb : work_.labs) {
            if (lb.patient_id == e->patient_id && lb.analyte == rule->analyte &&
                std::abs(lb.collection_day - e->start_day) <= window) {
                restore.push_back(lb);
                removed.push_back(lb.lab_id);
                work_.provenance.erase(lb.lab_id);
            } else {
                kept.push_back(std::move(lb));
            }
        }
        work_.labs = std::move(kept);
        return annotate(id, e->patient_id, 6, "remove_supporting_labs", {{"restore_labs", restore}},
                        {{"removed_lab_ids", removed}});
    }

    StudyDataset work_;
    const kb::KnowledgeBase& kb_;
    const InjectionPlan& plan_;
    Tolerances tol_;
    Rng rng_;
    StudyDay last_day_;
    std::set<std::string> used_;
};

} // namespace

InjectionResult inject_discrepancies(const StudyDataset& clean, const kb::KnowledgeBase& kb,
                                     const InjectionPlan& plan) {
    return Injector(clean, kb, plan).run();
}

StudyDataset revert(const StudyDataset& corrupted, const std::vector<GroundTruthAnnotation>& truth) {
    StudyDataset ds = corrupted;
    for (const auto& a : truth) {
        json fields = json::object();
        for (const auto& [k, v] : a.original_value.items()) {
            if (k == "restore_labs") {
                for (const auto& lb : v) {
                    ds.labs.push_back(lb.get<LabResult>());
                    ds.provenance[ds.labs.back().lab_id] = Provenance{"restored", 0};
                }
            } else {
                fields[k] = v;
            }
        }
        if (!fields.empty() && !detail::patch_record(ds, a.record_id, fields))
            throw NotFoundError("annotation references unknown record " + a.record_id);
    }
    sort_canonical(ds);
    validate(ds);
    return ds;
}

json truth_to_json(const InjectionResult& r, const InjectionPlan& plan) {
    json counts = json::object();
    for (int c = 1; c <= kCategoryCount; ++c)
        counts[std::to_string(c)] = std::count_if(r.truth.begin(), r.truth.end(),
                                                  [&](const auto& a) { return a.category == c; });
    return json{{"version", 1},
                {"seed", plan.seed},
                {"rate", plan.rate},
                {"eligible_points", r.eligible_points},
                {"category_counts", counts},
                {"warnings", r.warnings},
                {"annotations", r.truth}};
}

std::vector<GroundTruthAnnotation> truth_from_json(const json& j) {
    try {
        return j.at("annotations").get<std::vector<GroundTruthAnnotation>>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("truth file: ") + e.what());
    }
}

} // namespace trialqc::synth
