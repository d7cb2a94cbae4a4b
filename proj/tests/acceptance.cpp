#include "fixtures.hpp"

#include "trialqc/audit.hpp"
#include "trialqc/dataset_io.hpp"
#include "trialqc/detector.hpp"
#include "trialqc/econ.hpp"
#include "trialqc/error.hpp"
#include "trialqc/query.hpp"
#include "trialqc/random.hpp"
#include "trialqc/scoring.hpp"
#include "trialqc/stats.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <vector>

using namespace trialqc;
using trialqc::test::TempDir;
using trialqc::test::read_file;
namespace fs = std::filesystem;

namespace {

struct Check {
    bool ok = true;
    std::string detail;

    void expect(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
    void near(double got, double want, double tol, const std::string& what) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s=%.6f want %.6f+-%g", what.c_str(), got, want, tol);
        expect(std::fabs(got - want) <= tol, buf);
    }
};

int failures = 0;

void criterion(const std::string& name, const std::function<void(Check&)>& body, double budget_s) {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(c);
    } catch (const std::exception& e) {
        c.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f s", secs);
    c.expect(secs < budget_s, std::string("runtime ") + buf);
    if (!c.ok)
        ++failures;
    std::cout << (c.ok ? "PASS " : "FAIL ") << name << " (" << buf << ")";
    if (!c.detail.empty())
        std::cout << ": " << c.detail;
    std::cout << '\n';
}

void econ_model(Check& c) {
    auto r = econ::total_report(econ::EconParams{});
    c.expect(r.lines.at(0).savings == Decimal::parse("420000"), "review savings");
    c.near(r.lines.at(1).traditional.to_double(), 651949, 10, "query traditional");
    c.near(r.lines.at(1).savings.to_double(), 287510, 30, "query savings");
    c.expect(r.lines.at(2).savings == Decimal::parse("4400000"), "dblock savings");
    c.near(r.total_savings.to_double(), 5107510, 50, "total savings");
    c.near(r.pct_reduction().value_or(-1), 15.2, 0.1, "pct reduction");
}

void study_statistics(Check& c) {
    c.expect(eval::required_n(1.0, 0.05, 0.8) == 10, "required n");
    // Differences with mean 17.1 and sd 8.16.
    std::vector<double> diff{5, 10, 15, 20, 25, 30, 12, 18, 16, 20};
    const double m = eval::mean(diff), s = eval::sample_sd(diff);
    for (auto& x : diff)
        x = 17.1 + (x - m) * 8.16 / s;
    const double d = eval::paired_cohens_d(diff);
    c.near(d, 2.10, 0.005, "cohens d");
    c.expect(eval::power_paired_t(10, d, 0.05) > 0.999, "power at n=10");

    Rng rng(777);
    for (int k = 0; k < 100; ++k) {
        const int n = rng.uniform_int(2, 40);
        std::vector<double> before(n), after(n);
        for (int i = 0; i < n; ++i) {
            before[i] = rng.uniform(0, 50);
            after[i] = before[i] + rng.uniform(-5, 15);
        }
        auto r = eval::paired_t_test(before, after);
        long double sum = 0, sq = 0;
        for (int i = 0; i < n; ++i)
            sum += static_cast<long double>(after[i]) - before[i];
        const long double mu = sum / n;
        for (int i = 0; i < n; ++i) {
            const long double e = static_cast<long double>(after[i]) - before[i] - mu;
            sq += e * e;
        }
        const double t = static_cast<double>(mu / std::sqrt(sq / (n - 1) / n));
        boost::math::students_t dist(n - 1);
        const double p = 2 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
        c.expect(std::fabs(r.t - t) <= 1e-9 * std::max(1.0, std::fabs(t)), "t fixture " + std::to_string(k));
        c.expect(std::fabs(r.p_two_sided - p) <= 1e-9, "p fixture " + std::to_string(k));
    }
}

void figure_metrics(Check& c) {
    const eval::ConfusionMatrix a{29, 36, 5, 5}, b{96, 7, 12, 109};
    auto ma = eval::confusion_metrics(a), mb = eval::confusion_metrics(b);
    c.near(100 * ma.accuracy, 45.3, 0.1, "accuracy A");
    c.near(100 * mb.accuracy, 91.5, 0.1, "accuracy B");
    c.near(100 * ma.precision.value_or(-1), 44.6, 0.1, "precision A");
    c.near(100 * mb.precision.value_or(-1), 93.2, 0.1, "precision B");
    c.near(100 * ma.recall.value_or(-1), 85.2, 0.1, "recall A");
    c.near(100 * mb.recall.value_or(-1), 88.9, 0.1, "recall B");
    c.near(100 * ma.f1.value_or(-1), 58.5, 0.1, "f1 A");
    c.near(100 * mb.f1.value_or(-1), 91.0, 0.1, "f1 B");
    c.near(ma.error_rate / mb.error_rate, 6.44, 0.02, "error ratio");
    const double fp_share_a = static_cast<double>(a.fp) / static_cast<double>(a.total());
    const double fp_share_b = static_cast<double>(b.fp) / static_cast<double>(b.total());
    const double fp_ratio = fp_share_a / fp_share_b;
    c.expect(fp_ratio >= 15.36 - 1e-9 && fp_ratio <= 15.48, "fp ratio " + std::to_string(fp_ratio));
}

std::string export_bytes(const StudyDataset& ds, const TempDir& dir, const std::string& name) {
    export_dataset(ds, dir / name);
    std::vector<fs::path> files(fs::directory_iterator(dir / name), fs::directory_iterator{});
    std::sort(files.begin(), files.end());
    std::string all;
    for (const auto& f : files)
        all += f.filename().string() + "\n" + read_file(f);
    return all;
}

void injection_contract(Check& c) {
    const auto& kb = test::shipped_kb();
    auto clean = synth::generate_patients(test::shipped_library(), kb, 50, 42);
    const auto eligible = synth::eligible_points(clean);
    c.expect(eligible >= 600, "eligible " + std::to_string(eligible));
    synth::InjectionPlan plan;
    plan.seed = 42;
    plan.rate = 0.1;
    auto r1 = synth::inject_discrepancies(clean, kb, plan);
    auto r2 = synth::inject_discrepancies(clean, kb, plan);
    const auto want = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(eligible)));
    c.expect(r1.truth.size() == want, "annotations " + std::to_string(r1.truth.size()));
    std::map<int, int> per;
    for (const auto& a : r1.truth)
        ++per[a.category];
    const double expected_per = static_cast<double>(want) / 6.0;
    for (int cat = 1; cat <= 6; ++cat)
        c.expect(std::fabs(per[cat] - expected_per) <= 1.0, "category " + std::to_string(cat));
    TempDir dir;
    c.expect(export_bytes(r1.corrupted, dir, "a") == export_bytes(r2.corrupted, dir, "b"), "corpus bytes");
    c.expect(synth::truth_to_json(r1, plan).dump() == synth::truth_to_json(r2, plan).dump(), "truth bytes");
    c.expect(export_bytes(synth::revert(r1.corrupted, r1.truth), dir, "r") == export_bytes(clean, dir, "c"),
             "revert");
}

void detector_quality(Check& c) {
    const auto& kb = test::shipped_kb();
    auto clean = synth::generate_patients(test::shipped_library(), kb, 50, 42);
    synth::InjectionPlan plan;
    plan.seed = 42;
    plan.rate = 0.1;
    auto inj = synth::inject_discrepancies(clean, kb, plan);
    auto det = detect::detect_all(inj.corrupted, kb);
    auto score = eval::score_findings(det.findings, inj.truth, inj.eligible_points);
    c.expect(score.metrics.recall.value_or(0) >= 0.95, "recall");
    c.expect(score.metrics.precision.value_or(0) >= 0.75, "precision");
    c.expect(score.category_accuracy.value_or(0) >= 0.8, "category accuracy");
    int categorized = 0;
    for (const auto& f : detect::detect_all(clean, kb).findings)
        categorized += f.category.has_value();
    c.expect(categorized == 0, "clean findings " + std::to_string(categorized));
}

int run_cli(const std::string& args) {
    const std::string cmd = "'" + test::cli_path() + "' " + args + " >/dev/null 2>&1";
    return std::system(cmd.c_str());
}

std::string pipeline(const TempDir& dir) {
    const auto p = [&](const char* name) { return "'" + (dir / name).string() + "'"; };
    if (run_cli("generate -n 50 --seed 42 -o " + p("clean")) != 0 ||
        run_cli("inject --in " + p("clean") + " --out " + p("dirty") + " --truth " + p("truth.json") +
                " --seed 42 --rate 0.1") != 0 ||
        run_cli("detect --in " + p("dirty") + " --out " + p("findings.ndjson")) != 0 ||
        run_cli("evaluate --findings " + p("findings.ndjson") + " --truth " + p("truth.json") + " --report " +
                p("report.json")) != 0)
        return {};
    return read_file(dir / "report.json");
}

void end_to_end(Check& c) {
    TempDir a, b;
    const auto ra = pipeline(a), rb = pipeline(b);
    c.expect(!ra.empty(), "pipeline ran");
    c.expect(ra == rb, "report bytes");
    c.expect(read_file(a / "findings.ndjson") == read_file(b / "findings.ndjson"), "findings bytes");
}

void query_lifecycle(Check& c) {
    using query::QueryAction;
    using query::QueryState;
    const std::map<std::pair<QueryState, QueryAction>, QueryState> table = {
        {{QueryState::draft, QueryAction::edit}, QueryState::draft},
        {{QueryState::draft, QueryAction::approve}, QueryState::approved},
        {{QueryState::draft, QueryAction::reject}, QueryState::rejected},
        {{QueryState::approved, QueryAction::send}, QueryState::sent},
        {{QueryState::sent, QueryAction::answer}, QueryState::answered},
        {{QueryState::answered, QueryAction::close}, QueryState::closed},
        {{QueryState::answered, QueryAction::send}, QueryState::sent},
    };
    detect::Finding f;
    f.finding_id = "F-6-AE001";
    f.patient_id = "P001";
    f.record_ids = {"AE001"};
    f.category = 6;
    f.facts = {{"ae_term", "anemia"}, {"patient_id", "P001"}};
    query::TemplateSet tpl = query::TemplateSet::defaults();
    tpl.set(6, "Please review {{ae_term}}.");

    for (auto s : query::kAllStates)
        for (auto a : query::kAllActions) {
            auto q = query::suggest_query(f, tpl);
            q.state = s;
            auto it = table.find({s, a});
            const std::string cell = std::string(to_string(s)) + "+" + std::string(to_string(a));
            try {
                auto t = query::transition(q, a, "alice", 1, "text");
                c.expect(it != table.end() && t.query.state == it->second, cell);
            } catch (const ConflictError&) {
                c.expect(it == table.end(), cell);
            }
        }

    Rng rng(4242);
    AuditLog log;
    std::map<std::string, QueryState> finals;
    std::int64_t clock = 0;
    for (int i = 0; i < 1000; ++i) {
        f.finding_id = "F-6-AE" + std::to_string(i);
        auto q = query::suggest_query(f, tpl);
        log.append(++clock, "alice", AuditAction::query_created, q.query_id, nlohmann::json::object());
        const int steps = rng.uniform_int(0, 12);
        for (int s = 0; s < steps; ++s) {
            auto a = query::kAllActions[rng.below(std::size(query::kAllActions))];
            if (!table.count({q.state, a}))
                continue;
            auto t = query::transition(q, a, "bob", ++clock, "edit " + std::to_string(s));
            log.append(t.audit);
            q = t.query;
        }
        finals[q.query_id] = q.state;
    }
    int mismatches = 0;
    for (const auto& [id, state] : finals)
        mismatches += query::replay_state(log.for_subject(id)) != state;
    c.expect(mismatches == 0, "replay mismatches " + std::to_string(mismatches));
}

query::ReviewSession scripted(const std::string& id, const std::string& reviewer, query::Condition cond,
                              int correct, int offset) {
    auto s = query::start_session(id, reviewer, cond, 0);
    std::int64_t t = 0;
    for (int i = 0; i < correct; ++i)
        s = query::record_decision(s, "D" + std::to_string(offset + i), query::Verdict::confirm, t += 1000);
    s = query::record_decision(s, "C" + std::to_string(offset), query::Verdict::confirm, t += 1000);
    return query::end_session(s, t + 1000);
}

void scripted_sessions(Check& c) {
    eval::SessionTruth truth;
    for (int i = 0; i < 300; ++i) {
        truth.discrepant.insert("D" + std::to_string(i));
        truth.clean.insert("C" + std::to_string(i));
    }
    const std::vector<int> baseline{1, 2, 3, 4, 5, 2, 3, 4, 3, 3};
    std::vector<query::ReviewSession> sessions;
    for (std::size_t i = 0; i < baseline.size(); ++i) {
        const auto r = "R" + std::to_string(i);
        sessions.push_back(scripted("B" + std::to_string(i), r, query::Condition::baseline, baseline[i], 0));
        sessions.push_back(scripted("A" + std::to_string(i), r, query::Condition::assisted, 6 * baseline[i], 100));
    }
    auto report = eval::score_sessions(sessions, truth);
    c.near(report.mean_baseline.value_or(-1), 3.0, 1e-12, "baseline mean");
    c.near(report.mean_assisted.value_or(-1), 18.0, 1e-12, "assisted mean");
    c.near(report.ratio_of_means.value_or(-1), 6.0, 1e-12, "ratio");
    c.expect(report.t_test && report.t_test->p_two_sided < 0.001, "p < 0.001");
}

} // namespace

int main() {
    criterion("econ model default savings and reduction", econ_model, 1);
    criterion("study statistics match the reference distributions", study_statistics, 5);
    criterion("confusion matrix panels and derived ratios", figure_metrics, 1);
    criterion("injection contract: counts, determinism, revert", injection_contract, 60);
    criterion("rule-only detector quality on a seeded corpus", detector_quality, 60);
    criterion("generate-inject-detect-evaluate is byte-identical across runs", end_to_end, 300);
    criterion("query lifecycle table and audit replay", query_lifecycle, 60);
    criterion("scripted reviewer sessions give a 6x throughput gain", scripted_sessions, 5);
    return failures == 0 ? 0 : 1;
}
