#include "fixtures.hpp"

#include "trialqc/error.hpp"

#include <gtest/gtest.h>

namespace trialqc::test {
namespace {

using nlohmann::json;
using kb::Indication;
using kb::LabGrade;

TEST(Normalize, SynonymMapsToCanonical) {
    EXPECT_EQ(shipped_kb().normalize_term("Anaemia"), "anemia");
    EXPECT_EQ(shipped_kb().normalize_term("  ALT   increased "), "alanine aminotransferase increased");
}

TEST(Normalize, CanonicalIsFixedPoint) {
    for (const auto& term : shipped_kb().synonyms().canonical_terms()) {
        auto once = shipped_kb().normalize_term(term);
        ASSERT_EQ(once, term);
        for (const auto& form : shipped_kb().synonyms().forms_of(term))
            EXPECT_EQ(shipped_kb().normalize_term(*shipped_kb().normalize_term(form)), term) << form;
    }
}

TEST(Normalize, UnknownTerm) { EXPECT_FALSE(shipped_kb().normalize_term("zzzz-not-a-term").has_value()); }

TEST(Indication, CuratedEntries) {
    EXPECT_EQ(shipped_kb().indicated_for("ondansetron", "nausea"), Indication::indicated);
    EXPECT_EQ(shipped_kb().indicated_for("ondansetron", "anemia"), Indication::not_indicated);
    EXPECT_EQ(shipped_kb().indicated_for("unlisted-drug", "nausea"), Indication::unknown_drug);
    EXPECT_EQ(shipped_kb().indicated_for("Zofran", "queasiness"), Indication::indicated);
    EXPECT_EQ(shipped_kb().indicated_for("placebo", "nausea"), Indication::not_indicated);
}

TEST(Grading, AnemiaBands) {
    auto g = shipped_kb().grade_from_lab("anemia", 7.5);
    EXPECT_TRUE(g.graded());
    EXPECT_EQ(g.grade, 3);
    EXPECT_EQ(shipped_kb().grade_from_lab("anemia", 14.0).status, LabGrade::Status::within_normal);
    EXPECT_EQ(shipped_kb().grade_from_lab("headache", 1.0).status, LabGrade::Status::not_gradeable);
    EXPECT_EQ(shipped_kb().grade_from_lab("headache", 1e6).status, LabGrade::Status::not_gradeable);
}

TEST(Grading, MatchesBandTableOnSweep) {
    // Hemoglobin (g/dL): <12 grade 1, <10 grade 2, <8 grade 3, <6.5 grade 4.
    auto oracle = [](double v) { return v < 6.5 ? 4 : v < 8 ? 3 : v < 10 ? 2 : v < 12 ? 1 : 0; };
    for (int i = 0; i <= 200; ++i) {
        double v = 4.0 + i * 0.05;
        EXPECT_EQ(shipped_kb().grade_from_lab("anemia", v).grade, oracle(v)) << v;
    }
    // ALT (U/L): >40 grade 1, >120 grade 2, >200 grade 3, >800 grade 4.
    auto alt = [](double v) { return v > 800 ? 4 : v > 200 ? 3 : v > 120 ? 2 : v > 40 ? 1 : 0; };
    for (double v : {10.0, 40.0, 40.5, 120.0, 121.0, 200.0, 450.0, 800.0, 900.0})
        EXPECT_EQ(shipped_kb().grade_from_lab("elevated alt", v).grade, alt(v)) << v;
}

TEST(Grading, EveryRuleIsMonotone) {
    for (const auto& rule : shipped_kb().grading_rules()) {
        int prev = 0;
        // Sweep from well inside the normal range to well past the last threshold.
        const bool above = rule.direction == kb::Direction::above;
        const double lo = above ? rule.thresholds.front() / 2 : rule.thresholds.front() * 2;
        const double hi = above ? rule.thresholds.back() * 2 : rule.thresholds.back() / 2;
        for (int i = 0; i <= 100; ++i) {
            double v = lo + (hi - lo) * i / 100.0;
            int g = kb::KnowledgeBase::grade_with(rule, v).grade;
            EXPECT_GE(g, prev) << rule.ae_term << " at " << v;
            prev = g;
        }
        EXPECT_EQ(prev, static_cast<int>(rule.thresholds.size()));
    }
}

TEST(NarrativeCues, WholeWordsOnly) {
    EXPECT_EQ(shipped_kb().narrative_min_grade("Patient required hospitalization for dehydration"), 3);
    EXPECT_EQ(shipped_kb().narrative_min_grade("mild headache"), 1);
    EXPECT_EQ(shipped_kb().narrative_min_grade("no cue here"), 0);
    EXPECT_EQ(shipped_kb().narrative_min_grade("severely"), 0);
    EXPECT_EQ(shipped_kb().narrative_min_grade("Moderate, later LIFE-THREATENING"), 4);
}

TEST(StudyDrug, Toxicities) {
    EXPECT_TRUE(shipped_kb().is_study_drug_toxicity("Anaemia"));
    EXPECT_FALSE(shipped_kb().is_study_drug_toxicity("headache"));
}

TEST(KnowledgeBaseLoad, RejectsCollidingSynonyms) {
    kb::SynonymTable t;
    t.add("nausea", {"queasy"});
    EXPECT_THROW(t.add("vomiting", {"Queasy"}), ValidationError);
}

TEST(KnowledgeBaseLoad, RejectsNonMonotoneThresholds) {
    auto j = json::parse(read_file(data_dir() / "knowledge_base.json"));
    j["grading_rules"][0]["thresholds"] = {12.0, 13.0};
    EXPECT_THROW(kb::KnowledgeBase::from_json(j), ValidationError);
}

TEST(KnowledgeBaseLoad, RejectsUnknownIndicationTerm) {
    auto j = json::parse(read_file(data_dir() / "knowledge_base.json"));
    j["drugs"][0]["indications"].push_back("not a term");
    EXPECT_THROW(kb::KnowledgeBase::from_json(j), ValidationError);
}

TEST(KnowledgeBaseLoad, MissingFile) {
    EXPECT_THROW(kb::KnowledgeBase::load("/nonexistent/kb.json"), IoError);
}

} // namespace
} // namespace trialqc::test
