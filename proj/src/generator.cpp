#include "trialqc/dataset_io.hpp"
#include "trialqc/error.hpp"
#include "trialqc/patient_view.hpp"
#include "trialqc/synth.hpp"

#include "record_patch.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace trialqc::synth {

using nlohmann::json;

namespace {

std::string numbered(const std::string& prefix, int n, int width) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%0*d", width, n);
    return prefix + buf;
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

std::string narrative_for(const std::string& term, int grade) {
    switch (grade) {
    case 1: return "Mild " + term + " reported at visit; no intervention required.";
    case 2: return "Moderate " + term + " limiting instrumental activities of daily living.";
    case 3: return "Severe " + term + " requiring hospitalization.";
    default: return "Life-threatening " + term + "; urgent intervention indicated.";
    }
}

struct Interval {
    StudyDay start;
    StudyDay end;
    double dose;
};

/// Draws `count` distinct indices from a weighted library, honoring `accept`.
template <class Accept>
std::vector<std::size_t> sample_distinct(Rng& rng, const std::vector<WeightedElement>& elems, int count,
                                         Accept accept) {
    std::vector<double> w;
    for (const auto& e : elems)
        w.push_back(e.weight);
    std::vector<std::size_t> picked;
    for (int tries = 0; static_cast<int>(picked.size()) < count && tries < 20 * count + 20; ++tries) {
        auto i = rng.weighted(w);
        if (w[i] == 0.0)
            continue;
        w[i] = 0.0;
        if (!accept(elems[i].element))
            continue;
        picked.push_back(i);
        if (std::all_of(w.begin(), w.end(), [](double x) { return x == 0.0; }))
            break;
    }
    return picked;
}

class PatientBuilder {
public:
    PatientBuilder(const ElementLibrary& lib, const kb::KnowledgeBase& kb, const GeneratorConfig& cfg,
                   std::uint64_t seed, int index)
        : lib_(lib), kb_(kb), cfg_(cfg), rng_(split_seed(seed, static_cast<std::uint64_t>(index))),
          pid_(numbered("P", index + 1, 4)) {}

    void build(StudyDataset& out) {
        Patient p;
        p.patient_id = pid_;
        p.age = rng_.uniform_int(25, 82);
        p.sex = rng_.chance(0.5) ? Sex::female : Sex::male;
        p.enrollment_day = -rng_.uniform_int(7, 21);
        enrollment_day_ = p.enrollment_day;
        out.patients.push_back(p);

        make_history();
        make_adverse_events();
        make_exposure();
        assign_causality();
        make_labs();
        make_conmeds();
        make_vitals();
        make_procedures();

        auto prov = [&](const std::string& id, Domain d, std::size_t row) {
            out.provenance[id] = Provenance{"synthetic:" + std::string(to_string(d)), row};
        };
        prov(p.patient_id, Domain::demographics, out.patients.size());
        auto move_all = [&](auto& src, auto& dst, Domain d, auto id_of) {
            for (auto& r : src) {
                dst.push_back(std::move(r));
                prov(id_of(dst.back()), d, dst.size());
            }
        };
        move_all(aes_, out.adverse_events, Domain::adverse_events, [](auto& r) { return r.ae_id; });
        move_all(conmeds_, out.conmeds, Domain::concomitant_medications, [](auto& r) { return r.cm_id; });
        move_all(labs_, out.labs, Domain::labs, [](auto& r) { return r.lab_id; });
        move_all(vitals_, out.vitals, Domain::vitals, [](auto& r) { return r.vs_id; });
        move_all(exposures_, out.exposures, Domain::exposure, [](auto& r) { return r.ex_id; });
        move_all(history_, out.medical_history, Domain::medical_history, [](auto& r) { return r.mh_id; });
        move_all(procedures_, out.procedures, Domain::procedures, [](auto& r) { return r.pr_id; });
    }

private:
    void make_history() {
        const auto& elems = lib_.at(LibraryDomain::medical_history);
        auto picks = sample_distinct(rng_, elems, rng_.uniform_int(0, 2), [](const std::string&) { return true; });
        int n = 0;
        for (auto i : picks) {
            MedicalHistoryItem mh;
            mh.mh_id = pid_ + "-" + numbered("MH", ++n, 2);
            mh.patient_id = pid_;
            mh.condition = elems[i].element;
            mh.pre_study = true;
            history_.push_back(std::move(mh));
        }
    }

    void make_adverse_events() {
        const auto& elems = lib_.at(LibraryDomain::adverse_events);
        std::set<Analyte> analytes;
        std::set<std::string> terms;
        auto accept = [&](const std::string& term) {
            auto canon = kb_.normalize_term(term).value_or(kb::fold(term));
            if (!terms.insert(canon).second)
                return false;
            if (const auto* rule = kb_.grading_rule(term))
                return analytes.insert(rule->analyte).second;
            return true;
        };
        auto picks =
            sample_distinct(rng_, elems, rng_.uniform_int(cfg_.min_adverse_events, cfg_.max_adverse_events), accept);
        const StudyDay last = cfg_.last_day();
        const double grade_weights[] = {0.45, 0.35, 0.15, 0.05};
        for (auto i : picks) {
            AdverseEvent ae;
            ae.patient_id = pid_;
            ae.term = elems[i].element;
            ae.start_day = rng_.uniform_int(2, last - 9);
            if (!rng_.chance(0.1))
                ae.end_day = std::min(last, ae.start_day + rng_.uniform_int(0, 13));
            ae.grade = static_cast<int>(rng_.weighted(grade_weights)) + 1;
            if (const auto* rule = kb_.grading_rule(ae.term))
                ae.grade = std::min<int>(ae.grade, static_cast<int>(rule->thresholds.size()));
            ae.narrative = narrative_for(kb::fold(ae.term), ae.grade);
            ae.serious = ae.grade >= 3;
            aes_.push_back(std::move(ae));
        }
        std::stable_sort(aes_.begin(), aes_.end(),
                         [](const auto& a, const auto& b) { return a.start_day < b.start_day; });
        int n = 0;
        for (auto& ae : aes_)
            ae.ae_id = pid_ + "-" + numbered("AE", ++n, 2);
    }

    void make_exposure() {
        std::vector<Interval> cover;
        for (int c = 0; c < cfg_.cycles; ++c)
            cover.push_back({1 + c * cfg_.cycle_days, (c + 1) * cfg_.cycle_days, cfg_.base_dose_mg});

        std::vector<AdverseEvent*> candidates;
        for (auto& ae : aes_)
            if (ae.grade >= 2 && ae.start_day <= cfg_.last_day() - 14)
                candidates.push_back(&ae);
        if (!candidates.empty() && rng_.chance(cfg_.dose_action_probability)) {
            auto* ae = candidates[rng_.below(candidates.size())];
            const double kinds[] = {0.5, 0.3, 0.2};
            switch (rng_.weighted(kinds)) {
            case 0: {
                ae->action_taken = ActionTaken::dose_reduced;
                StudyDay r = ae->start_day + rng_.uniform_int(0, 5);
                std::vector<Interval> next;
                for (const auto& iv : cover) {
                    if (iv.end < r) {
                        next.push_back(iv);
                    } else if (iv.start >= r) {
                        next.push_back({iv.start, iv.end, cfg_.base_dose_mg * 0.75});
                    } else {
                        next.push_back({iv.start, r - 1, iv.dose});
                        next.push_back({r, iv.end, cfg_.base_dose_mg * 0.75});
                    }
                }
                cover = std::move(next);
                break;
            }
            case 1: {
                ae->action_taken = ActionTaken::dose_interrupted;
                StudyDay g = ae->start_day + rng_.uniform_int(0, 3);
                StudyDay g_end = g + rng_.uniform_int(3, 7) - 1;
                std::vector<Interval> next;
                for (const auto& iv : cover) {
                    if (iv.end < g || iv.start > g_end) {
                        next.push_back(iv);
                        continue;
                    }
                    if (iv.start < g)
                        next.push_back({iv.start, g - 1, iv.dose});
                    if (iv.end > g_end)
                        next.push_back({g_end + 1, iv.end, iv.dose});
                }
                cover = std::move(next);
                break;
            }
            default: {
                ae->action_taken = ActionTaken::drug_withdrawn;
                StudyDay w = ae->start_day + rng_.uniform_int(0, 3);
                std::vector<Interval> next;
                for (const auto& iv : cover) {
                    if (iv.start >= w)
                        break;
                    next.push_back({iv.start, std::min(iv.end, w - 1), iv.dose});
                }
                cover = std::move(next);
            }
            }
        }
        int n = 0;
        for (const auto& iv : cover) {
            ExposureRecord ex;
            ex.ex_id = pid_ + "-" + numbered("EX", ++n, 2);
            ex.patient_id = pid_;
            ex.dose_mg = iv.dose;
            ex.start_day = iv.start;
            ex.end_day = iv.end;
            exposures_.push_back(std::move(ex));
        }
    }

    void assign_causality() {
        const int window = cfg_.tolerances.causality_days;
        for (auto& ae : aes_) {
            bool near_dose = std::any_of(exposures_.begin(), exposures_.end(), [&](const auto& ex) {
                int lag = ae.start_day - ex.start_day;
                return lag >= 0 && lag <= window;
            });
            if (kb_.is_study_drug_toxicity(ae.term) && near_dose) {
                ae.causality = rng_.chance(0.6) ? Causality::related : Causality::possibly_related;
            } else {
                const double w[] = {0.2, 0.3, 0.5};
                ae.causality = static_cast<Causality>(rng_.weighted(w));
            }
        }
    }

    double graded_value(const kb::GradingRule& rule, int grade) {
        const auto& t = rule.thresholds;
        const auto k = t.size();
        auto g = static_cast<std::size_t>(grade);
        double edge = t[g - 1];
        double other;
        if (rule.direction == kb::Direction::below)
            other = g < k ? t[g] : t[k - 1] * 0.6;
        else
            other = g < k ? t[g] : t[k - 1] * 1.4;
        return round2(edge + (other - edge) * rng_.uniform(0.2, 0.8));
    }

    double normal_value(Analyte a) {
        const auto& r = kb_.reference_range(a);
        double span = r.high - r.low;
        return round2(rng_.uniform(r.low + 0.1 * span, r.high - 0.1 * span));
    }

    void add_lab(Analyte a, StudyDay day, double value) {
        const auto& r = kb_.reference_range(a);
        LabResult lb;
        lb.patient_id = pid_;
        lb.analyte = a;
        lb.value = value;
        lb.units = r.units.empty() ? std::string(default_units(a)) : r.units;
        lb.collection_day = day;
        lb.normal_low = r.low;
        lb.normal_high = r.high;
        labs_.push_back(std::move(lb));
    }

    void make_labs() {
        const StudyDay last = cfg_.last_day();
        std::vector<StudyDay> routine_days{-7};
        for (int c = 1; c < cfg_.cycles; ++c)
            routine_days.push_back(1 + c * cfg_.cycle_days);

        for (StudyDay day : routine_days) {
            for (Analyte a : {Analyte::hemoglobin, Analyte::platelets, Analyte::alt}) {
                const AdverseEvent* active = nullptr;
                const kb::GradingRule* rule = nullptr;
                for (const auto& ae : aes_) {
                    const auto* r = kb_.grading_rule(ae.term);
                    if (r && r->analyte == a && ae.start_day <= day && day <= effective_end(ae, last)) {
                        active = &ae;
                        rule = r;
                    }
                }
                add_lab(a, day, active ? graded_value(*rule, active->grade) : normal_value(a));
            }
        }
        for (const auto& ae : aes_) {
            if (const auto* rule = kb_.grading_rule(ae.term))
                add_lab(rule->analyte, ae.start_day + rng_.uniform_int(0, 3), graded_value(*rule, ae.grade));
        }
        for (const auto& ae : aes_) {
            if (kb_.normalize_term(ae.term) == std::optional<std::string>("edema") && rng_.chance(0.5)) {
                add_lab(Analyte::bnp, ae.start_day + rng_.uniform_int(0, 3), round2(rng_.uniform(150, 600)));
                heart_failure_day_ = ae.start_day + 1;
            }
        }
        std::stable_sort(labs_.begin(), labs_.end(), [](const auto& a, const auto& b) {
            return std::tie(a.collection_day, a.analyte) < std::tie(b.collection_day, b.analyte);
        });
        int n = 0;
        for (auto& lb : labs_)
            lb.lab_id = pid_ + "-" + numbered("LB", ++n, 3);
    }

    /// Library drugs indicated for `term`, with their library weights.
    std::vector<WeightedElement> treatments_for(const std::string& term) const {
        std::vector<WeightedElement> out;
        for (const auto& e : lib_.at(LibraryDomain::conmeds))
            if (kb_.indicated_for(e.element, term) == kb::Indication::indicated)
                out.push_back(e);
        return out;
    }

    void make_conmeds() {
        const StudyDay last = cfg_.last_day();
        int n = 0;
        auto add = [&](const WeightedElement& drug, const std::string& indication, std::optional<std::string> link,
                       StudyDay start, std::optional<StudyDay> end) {
            ConcomitantMedication cm;
            cm.cm_id = pid_ + "-" + numbered("CM", ++n, 2);
            cm.patient_id = pid_;
            cm.drug_name = drug.element;
            cm.indication_text = indication;
            cm.linked_ae_id = std::move(link);
            cm.start_day = start;
            cm.end_day = end;
            cm.dose_text = "standard dose";
            conmeds_.push_back(std::move(cm));
        };
        auto pick = [&](const std::vector<WeightedElement>& options) -> const WeightedElement& {
            std::vector<double> w;
            for (const auto& o : options)
                w.push_back(o.weight);
            return options[rng_.weighted(w)];
        };
        for (const auto& mh : history_) {
            auto options = treatments_for(mh.condition);
            if (options.empty() || !rng_.chance(0.8))
                continue;
            const auto& drug = pick(options);
            const auto* mono = kb_.drug(drug.element);
            if (mono && mono->drug_class == "chemotherapy")
                add(drug, mh.condition, std::nullopt, 1, last - cfg_.cycle_days);
            else
                add(drug, mh.condition, std::nullopt, enrollment_day_ - rng_.uniform_int(30, 365), std::nullopt);
        }
        for (const auto& ae : aes_) {
            auto options = treatments_for(ae.term);
            if (options.empty() || !rng_.chance(cfg_.treat_probability))
                continue;
            const auto& drug = pick(options);
            StudyDay start = ae.start_day + rng_.uniform_int(0, 2);
            std::optional<StudyDay> end;
            if (ae.end_day)
                end = std::max(start, *ae.end_day + rng_.uniform_int(0, 3));
            add(drug, ae.term, ae.ae_id, start, end);
        }
    }

    void make_vitals() {
        double base = round2(rng_.uniform(55.0, 100.0));
        std::vector<std::pair<StudyDay, double>> points;
        for (StudyDay d : {-7, 1})
            points.emplace_back(d, base + rng_.uniform(-0.8, 0.8));
        for (int c = 1; c < cfg_.cycles; ++c)
            points.emplace_back(1 + c * cfg_.cycle_days, base + rng_.uniform(-0.8, 0.8));
        points.emplace_back(cfg_.last_day(), base + rng_.uniform(-0.8, 0.8));
        if (heart_failure_day_)
            points.emplace_back(*heart_failure_day_, base + rng_.uniform(3.0, 4.5));
        std::stable_sort(points.begin(), points.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        int n = 0;
        for (const auto& [day, w] : points) {
            VitalSign vs;
            vs.vs_id = pid_ + "-" + numbered("VS", ++n, 2);
            vs.patient_id = pid_;
            vs.day = day;
            vs.weight_kg = std::round(w * 10.0) / 10.0;
            vs.systolic_bp = rng_.uniform_int(108, 138);
            vs.diastolic_bp = rng_.uniform_int(64, 88);
            vitals_.push_back(std::move(vs));
        }
    }

    void make_procedures() {
        const auto& elems = lib_.at(LibraryDomain::procedures);
        auto picks = sample_distinct(rng_, elems, rng_.uniform_int(0, 2), [](const std::string&) { return true; });
        std::vector<Procedure> list;
        for (auto i : picks) {
            Procedure pr;
            pr.patient_id = pid_;
            pr.name = elems[i].element;
            pr.day = rng_.uniform_int(-14, cfg_.last_day());
            list.push_back(std::move(pr));
        }
        std::stable_sort(list.begin(), list.end(), [](const auto& a, const auto& b) { return a.day < b.day; });
        int n = 0;
        for (auto& pr : list) {
            pr.pr_id = pid_ + "-" + numbered("PR", ++n, 2);
            procedures_.push_back(std::move(pr));
        }
    }

    const ElementLibrary& lib_;
    const kb::KnowledgeBase& kb_;
    const GeneratorConfig& cfg_;
    Rng rng_;
    std::string pid_;
    StudyDay enrollment_day_ = 1;
    std::optional<StudyDay> heart_failure_day_;

    std::vector<AdverseEvent> aes_;
    std::vector<ConcomitantMedication> conmeds_;
    std::vector<LabResult> labs_;
    std::vector<VitalSign> vitals_;
    std::vector<ExposureRecord> exposures_;
    std::vector<MedicalHistoryItem> history_;
    std::vector<Procedure> procedures_;
};

} // namespace

StudyDataset generate_patients(const ElementLibrary& lib, const kb::KnowledgeBase& kb, int n, std::uint64_t seed,
                               const GeneratorConfig& cfg) {
    if (n < 1)
        throw ValidationError("generate_patients: n must be at least 1");
    lib.validate();
    StudyDataset ds;
    for (int i = 0; i < n; ++i)
        PatientBuilder(lib, kb, cfg, seed, i).build(ds);
    validate(ds);
    return ds;
}

void apply_overlay(StudyDataset& ds, const json& overlay) {
    if (!overlay.contains("patches"))
        return;
    for (const auto& p : overlay.at("patches")) {
        auto id = p.at("record_id").get<std::string>();
        const auto& set = p.at("set");
        bool found = detail::patch_record(ds, id, set);
        if (!found)
            throw NotFoundError("overlay: unknown record " + id);
    }
    validate(ds);
}

} // namespace trialqc::synth
