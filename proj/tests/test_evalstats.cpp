#include "fixtures.hpp"

#include "trialqc/error.hpp"
#include "trialqc/scoring.hpp"
#include "trialqc/stats.hpp"

#include <boost/math/distributions/non_central_t.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

namespace trialqc::test {
namespace {

using eval::ConfusionMatrix;
namespace bm = boost::math;

struct OracleT {
    double t, p;
};

OracleT oracle_paired_t(const std::vector<double>& before, const std::vector<double>& after) {
    const std::size_t n = before.size();
    long double sum = 0;
    for (std::size_t i = 0; i < n; ++i)
        sum += static_cast<long double>(after[i]) - before[i];
    const long double m = sum / n;
    long double ss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        long double d = static_cast<long double>(after[i]) - before[i] - m;
        ss += d * d;
    }
    const double sd = static_cast<double>(std::sqrt(ss / (n - 1)));
    const double t = static_cast<double>(m) / (sd / std::sqrt(static_cast<double>(n)));
    bm::students_t dist(static_cast<double>(n - 1));
    return {t, 2 * bm::cdf(bm::complement(dist, std::fabs(t)))};
}

double oracle_power(int n, double d, double alpha) {
    const double df = n - 1;
    const double crit = bm::quantile(bm::students_t(df), 1 - alpha / 2);
    const double delta = d * std::sqrt(static_cast<double>(n));
    if (delta == 0)
        return alpha;
    bm::non_central_t nct(df, delta);
    return bm::cdf(bm::complement(nct, crit)) + bm::cdf(nct, -crit);
}

TEST(ConfusionMetrics, Fig4LowerPanel) {
    auto m = eval::confusion_metrics({29, 36, 5, 5});
    EXPECT_NEAR(m.accuracy * 100, 45.3, 0.1);
    EXPECT_NEAR(*m.precision * 100, 44.6, 0.1);
    EXPECT_NEAR(*m.recall * 100, 85.2, 0.1);
    EXPECT_NEAR(*m.f1 * 100, 58.5, 0.1);
    EXPECT_DOUBLE_EQ(m.accuracy, 34.0 / 75.0);
    EXPECT_DOUBLE_EQ(*m.f1, 2.0 * 29 / (2.0 * 29 + 36 + 5));
}

TEST(ConfusionMetrics, Fig4UpperPanel) {
    auto m = eval::confusion_metrics({96, 7, 12, 109});
    EXPECT_NEAR(m.accuracy * 100, 91.5, 0.1);
    EXPECT_NEAR(*m.precision * 100, 93.2, 0.1);
    EXPECT_NEAR(*m.recall * 100, 88.9, 0.1);
    EXPECT_NEAR(*m.f1 * 100, 91.0, 0.1);
}

TEST(ConfusionMetrics, DerivedRatios) {
    auto lo = eval::confusion_metrics({29, 36, 5, 5});
    auto hi = eval::confusion_metrics({96, 7, 12, 109});
    EXPECT_NEAR(lo.error_rate / hi.error_rate, 6.44, 0.02);
    const double fp_share = (36.0 / 75.0) / (7.0 / 224.0);
    EXPECT_GE(fp_share, 15.36 - 1e-9);
    EXPECT_LE(fp_share, 15.48);
    EXPECT_NEAR(*lo.false_positive_rate, 36.0 / 41.0, 1e-15);
}

TEST(ConfusionMetrics, DegenerateAndInvalid) {
    auto m = eval::confusion_metrics({0, 0, 0, 10});
    EXPECT_DOUBLE_EQ(m.accuracy, 1.0);
    EXPECT_FALSE(m.precision.has_value());
    EXPECT_FALSE(m.recall.has_value());
    EXPECT_FALSE(m.f1.has_value());
    EXPECT_THROW(eval::confusion_metrics({0, 0, 0, 0}), ValidationError);
    EXPECT_THROW(eval::confusion_metrics({-1, 0, 0, 3}), ValidationError);
}

TEST(Distributions, MatchBoost) {
    for (double a : {0.5, 1.0, 2.5, 7.0, 30.0})
        for (double b : {0.5, 1.5, 4.0, 12.0})
            for (double x : {0.01, 0.2, 0.5, 0.77, 0.99})
                EXPECT_NEAR(eval::incomplete_beta(x, a, b), bm::ibeta(a, b, x), 1e-10) << a << " " << b << " " << x;
    for (double df : {1.0, 2.0, 5.0, 9.0, 30.0, 120.0})
        for (double t : {-6.0, -2.3, -0.4, 0.0, 0.7, 1.96, 4.2}) {
            EXPECT_NEAR(eval::student_t_cdf(t, df), bm::cdf(bm::students_t(df), t), 1e-10) << df << " " << t;
            for (double delta : {0.0, 0.8, 3.16, 6.6})
                EXPECT_NEAR(eval::noncentral_t_cdf(t, df, delta), bm::cdf(bm::non_central_t(df, delta), t), 1e-9)
                    << df << " " << t << " " << delta;
        }
    for (double df : {2.0, 9.0, 40.0})
        for (double p : {0.025, 0.5, 0.9, 0.975})
            EXPECT_NEAR(eval::student_t_quantile(p, df), bm::quantile(bm::students_t(df), p), 1e-8);
    EXPECT_NEAR(eval::normal_cdf(1.959963984540054), 0.975, 1e-12);
}

TEST(Descriptive, MeanSdMedian) {
    std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
    EXPECT_DOUBLE_EQ(eval::mean(v), 5.0);
    EXPECT_NEAR(eval::sample_sd(v), std::sqrt(32.0 / 7.0), 1e-15);
    EXPECT_DOUBLE_EQ(eval::median(v), 4.5);
    std::vector<double> one{1};
    EXPECT_THROW(eval::sample_sd(one), ValidationError);
}

TEST(CohensD, PaperSummary) {
    // Ten differences rescaled to mean 17.1 and sd 8.16 exactly.
    std::vector<double> z{-1.2, 0.4, 1.9, -0.3, 0.8, -1.6, 0.2, 1.1, -0.7, 0.5};
    const double zm = eval::mean(z), zs = eval::sample_sd(z);
    std::vector<double> d;
    for (double x : z)
        d.push_back(17.1 + 8.16 * (x - zm) / zs);
    EXPECT_NEAR(eval::mean(d), 17.1, 1e-12);
    EXPECT_NEAR(eval::sample_sd(d), 8.16, 1e-12);
    EXPECT_NEAR(eval::paired_cohens_d(d), 2.10, 0.005);
}

TEST(CohensD, ZeroMeanAndZeroSd) {
    std::vector<double> sym{5, -5};
    EXPECT_DOUBLE_EQ(eval::paired_cohens_d(sym), 0.0);
    std::vector<double> flat{2, 2, 2};
    EXPECT_THROW(eval::paired_cohens_d(flat), ValidationError);
}

TEST(Power, PaperValues) {
    EXPECT_NEAR(eval::power_paired_t(10, 1.0, 0.05), 0.80, 0.02);
    EXPECT_GT(eval::power_paired_t(10, 2.10, 0.05), 0.999);
    EXPECT_NEAR(eval::power_paired_t(2, 0.0, 0.05), 0.05, 1e-9);
}

TEST(Power, MatchesBoostOracle) {
    for (int n : {2, 3, 5, 8, 10, 15, 30, 60})
        for (double d : {0.1, 0.35, 0.8, 1.0, 1.7, 2.1})
            for (double alpha : {0.01, 0.05, 0.1})
                EXPECT_NEAR(eval::power_paired_t(n, d, alpha), oracle_power(n, d, alpha), 1e-8)
                    << n << " " << d << " " << alpha;
}

TEST(RequiredN, PaperValuesAndOracleSearch) {
    EXPECT_EQ(eval::required_n(1.0, 0.05, 0.80), 10);
    EXPECT_LT(eval::power_paired_t(9, 1.0, 0.05), 0.80);
    EXPECT_LE(eval::required_n(2.10, 0.05, 0.80), 5);
    EXPECT_GT(eval::required_n(0.5, 0.05, 0.80), eval::required_n(1.0, 0.05, 0.80));
    for (double d : {0.3, 0.5, 0.9, 1.4, 2.1}) {
        int n = 2;
        while (oracle_power(n, d, 0.05) < 0.80)
            ++n;
        EXPECT_EQ(eval::required_n(d, 0.05, 0.80), n) << d;
    }
}

TEST(PairedTTest, IdenticalVectorsAndBadInput) {
    std::vector<double> a{1, 2, 3}, b{1, 2};
    EXPECT_THROW(eval::paired_t_test(a, a), ValidationError);
    EXPECT_THROW(eval::paired_t_test(a, b), ValidationError);
}

TEST(PairedTTest, ConstantShiftWithNoise) {
    Rng rng(5);
    std::vector<double> before, after;
    for (int i = 0; i < 12; ++i) {
        before.push_back(rng.uniform(0, 10));
        after.push_back(before.back() + 4.0 + rng.uniform(-0.05, 0.05));
    }
    auto r = eval::paired_t_test(before, after);
    EXPECT_LT(r.p_two_sided, 0.001);
    EXPECT_GT(r.t, 0);
    EXPECT_NEAR(r.mean_difference, 4.0, 0.05);
}

TEST(PairedTTest, MatchesReferenceOnRandomFixtures) {
    Rng rng(777);
    for (int k = 0; k < 100; ++k) {
        const int n = rng.uniform_int(3, 40);
        const double shift = rng.uniform(-2, 2);
        std::vector<double> before, after;
        for (int i = 0; i < n; ++i) {
            before.push_back(rng.uniform(-10, 10));
            after.push_back(before.back() + shift + rng.uniform(-3, 3));
        }
        auto r = eval::paired_t_test(before, after);
        auto o = oracle_paired_t(before, after);
        EXPECT_NEAR(r.t, o.t, 1e-9 * std::max(1.0, std::fabs(o.t))) << k;
        EXPECT_NEAR(r.p_two_sided, o.p, 1e-9) << k;
        EXPECT_EQ(r.df, n - 1);
    }
}

TEST(Questionnaires, Sus) {
    std::vector<int> best{5, 1, 5, 1, 5, 1, 5, 1, 5, 1}, mid(10, 3), ex{5, 2, 4, 1, 5, 1, 4, 2, 5, 1};
    EXPECT_DOUBLE_EQ(eval::sus_score(best), 100.0);
    EXPECT_DOUBLE_EQ(eval::sus_score(mid), 50.0);
    EXPECT_DOUBLE_EQ(eval::sus_score(ex), 90.0);
    std::vector<int> bad{6, 1, 5, 1, 5, 1, 5, 1, 5, 1}, short_list{3, 3};
    EXPECT_THROW(eval::sus_score(bad), ValidationError);
    EXPECT_THROW(eval::sus_score(short_list), ValidationError);
}

TEST(Questionnaires, InverseTlx) {
    std::vector<double> zero(6, 0), full(6, 100), ex{10, 20, 30, 40, 50, 60};
    EXPECT_DOUBLE_EQ(eval::inverse_tlx(zero), 100.0);
    EXPECT_DOUBLE_EQ(eval::inverse_tlx(full), 0.0);
    EXPECT_DOUBLE_EQ(eval::inverse_tlx(ex), 65.0);
}

detect::Finding finding(std::string id, std::string primary, std::optional<int> category) {
    detect::Finding f;
    f.finding_id = std::move(id);
    f.patient_id = "P001";
    f.record_ids = {std::move(primary)};
    f.category = category;
    return f;
}

synth::GroundTruthAnnotation annotation(std::string record, int category) {
    return {std::move(record), "P001", category, "t", nlohmann::json::object(), nlohmann::json::object()};
}

TEST(ScoreFindings, RecordLevelMatching) {
    std::vector<synth::GroundTruthAnnotation> truth{annotation("AE1", 3), annotation("CM1", 1),
                                                    annotation("AE9", 6)};
    std::vector<detect::Finding> findings{
        finding("F-3-AE1", "AE1", 3), finding("F-6-AE1", "AE1", 6), finding("F-2-CM1", "CM1", 2),
        finding("F-5-AE2", "AE2", 5), finding("F-U-CM7", "CM7", std::nullopt)};
    auto s = eval::score_findings(findings, truth, 20);
    EXPECT_EQ(s.cm, (ConfusionMatrix{2, 1, 1, 16}));
    EXPECT_EQ(s.unverifiable, 1u);
    EXPECT_EQ(s.findings_scored, 4u);
    EXPECT_DOUBLE_EQ(*s.category_accuracy, 0.5);
    EXPECT_EQ(s.missed_record_ids, (std::vector<std::string>{"AE9"}));
    EXPECT_EQ(s.false_positive_finding_ids, (std::vector<std::string>{"F-5-AE2"}));
    EXPECT_EQ(s.per_category[0].injected, 1);
    EXPECT_EQ(s.per_category[0].detected, 1);
    EXPECT_EQ(s.per_category[0].correctly_labelled, 0);
    EXPECT_EQ(s.per_category[2].correctly_labelled, 1);
    auto j = eval::to_json(s);
    EXPECT_EQ(j["confusion_matrix"]["tn"], 16);
}

query::ReviewSession scripted(const std::string& id, const std::string& reviewer, query::Condition c,
                              int correct, int wrong, int offset = 0) {
    auto s = query::start_session(id, reviewer, c, 0);
    std::int64_t t = 0;
    for (int i = 0; i < correct; ++i)
        s = query::record_decision(s, "D" + std::to_string(offset + i), query::Verdict::confirm, t += 1000);
    for (int i = 0; i < wrong; ++i)
        s = query::record_decision(s, "C" + std::to_string(offset + i), query::Verdict::confirm, t += 1000);
    return query::end_session(s, t + 1000);
}

eval::SessionTruth scripted_truth() {
    eval::SessionTruth truth;
    for (int i = 0; i < 200; ++i) {
        truth.discrepant.insert("D" + std::to_string(i));
        truth.clean.insert("C" + std::to_string(i));
    }
    return truth;
}

TEST(Sessions, TwentyCorrectConfirms) {
    auto s = scripted("S1", "alice", query::Condition::assisted, 20, 0);
    auto score = eval::score_session(s, scripted_truth());
    EXPECT_EQ(score.throughput, 20);
    EXPECT_EQ(score.decisions, 20);
    EXPECT_DOUBLE_EQ(*score.metrics->recall, 1.0);
    EXPECT_EQ(score.duration_ms, 21000);
}

TEST(Sessions, DismissOfTruthItemIsFalseNegative) {
    auto s = query::start_session("S1", "alice", query::Condition::baseline, 0);
    s = query::record_decision(s, "D1", query::Verdict::dismiss, 1);
    s = query::record_decision(s, "C1", query::Verdict::dismiss, 2);
    auto score = eval::score_session(s, scripted_truth());
    EXPECT_EQ(score.cm, (ConfusionMatrix{0, 0, 1, 1}));
    EXPECT_EQ(score.throughput, 1);
}

TEST(Sessions, UnknownFindingIsRejected) {
    auto s = query::start_session("S1", "alice", query::Condition::baseline, 0);
    s = query::record_decision(s, "X1", query::Verdict::dismiss, 1);
    EXPECT_THROW(eval::score_sessions({s}, scripted_truth()), ValidationError);
}

TEST(Sessions, ScriptedPairGivesSixfoldRatio) {
    const std::vector<int> baseline{1, 2, 3, 4, 5, 2, 3, 4, 3, 3};
    std::vector<query::ReviewSession> sessions;
    for (std::size_t i = 0; i < baseline.size(); ++i) {
        const auto r = "R" + std::to_string(i);
        sessions.push_back(scripted("B" + std::to_string(i), r, query::Condition::baseline, baseline[i], 1));
        sessions.push_back(scripted("A" + std::to_string(i), r, query::Condition::assisted, 6 * baseline[i], 1, 100));
    }
    auto report = eval::score_sessions(sessions, scripted_truth());
    ASSERT_EQ(report.reviewers.size(), baseline.size());
    EXPECT_DOUBLE_EQ(*report.mean_baseline, 3.0);
    EXPECT_DOUBLE_EQ(*report.mean_assisted, 18.0);
    EXPECT_DOUBLE_EQ(*report.ratio_of_means, 6.0);
    EXPECT_DOUBLE_EQ(*report.mean_of_ratios, 6.0);
    ASSERT_TRUE(report.t_test.has_value());
    EXPECT_LT(report.t_test->p_two_sided, 0.001);

    std::vector<double> b, a;
    for (int x : baseline) {
        b.push_back(x);
        a.push_back(6.0 * x);
    }
    auto o = oracle_paired_t(b, a);
    EXPECT_NEAR(report.t_test->t, o.t, 1e-9 * o.t);
    EXPECT_NEAR(report.t_test->p_two_sided, o.p, 1e-12);
}

TEST(Sessions, SingleReviewerHasNoTest) {
    std::vector<query::ReviewSession> sessions{scripted("B", "R", query::Condition::baseline, 3, 0),
                                               scripted("A", "R", query::Condition::assisted, 18, 0, 50)};
    auto report = eval::score_sessions(sessions, scripted_truth());
    EXPECT_DOUBLE_EQ(*report.ratio_of_means, 6.0);
    EXPECT_FALSE(report.t_test.has_value());
}

} // namespace
} // namespace trialqc::test
