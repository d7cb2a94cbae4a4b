#include "fixtures.hpp"

#include "trialqc/error.hpp"
#include "trialqc/query.hpp"

#include <gtest/gtest.h>

namespace trialqc::test {
namespace {

using query::QueryAction;
using query::QueryState;

// Allowed moves, written out independently of the implementation.
const std::map<std::pair<QueryState, QueryAction>, QueryState> kTable = {
    {{QueryState::draft, QueryAction::edit}, QueryState::draft},
    {{QueryState::draft, QueryAction::approve}, QueryState::approved},
    {{QueryState::draft, QueryAction::reject}, QueryState::rejected},
    {{QueryState::approved, QueryAction::send}, QueryState::sent},
    {{QueryState::sent, QueryAction::answer}, QueryState::answered},
    {{QueryState::answered, QueryAction::close}, QueryState::closed},
    {{QueryState::answered, QueryAction::send}, QueryState::sent},
};

detect::Finding timing_finding() {
    detect::Finding f;
    f.finding_id = "F-2-CM001";
    f.patient_id = "P001";
    f.record_ids = {"CM001", "AE001"};
    f.category = 2;
    f.severity = detect::Severity::minor;
    f.facts = {{"drug", "ondansetron"},  {"cm_start", "20"},     {"gap_days", "8"},
               {"relation", "after the adverse event ended"},    {"ae_term", "nausea"},
               {"ae_start", "10"},       {"ae_end", "12"},       {"patient_id", "P001"}};
    return f;
}

query::ReviewQuery draft() { return query::suggest_query(timing_finding(), query::TemplateSet::defaults()); }

TEST(StateMachine, ExhaustiveTableMatches) {
    int allowed = 0;
    for (auto s : query::kAllStates)
        for (auto a : query::kAllActions) {
            auto it = kTable.find({s, a});
            auto got = query::next_state(s, a);
            if (it == kTable.end()) {
                EXPECT_FALSE(got.has_value()) << to_string(s) << " + " << to_string(a);
                auto q = draft();
                q.state = s;
                EXPECT_THROW(query::transition(q, a, "alice", 1, "text"), ConflictError);
            } else {
                ++allowed;
                ASSERT_TRUE(got.has_value()) << to_string(s) << " + " << to_string(a);
                EXPECT_EQ(*got, it->second);
            }
        }
    EXPECT_EQ(allowed, 7);
    EXPECT_TRUE(query::is_terminal(QueryState::closed));
    EXPECT_TRUE(query::is_terminal(QueryState::rejected));
    EXPECT_FALSE(query::is_terminal(QueryState::answered));
}

TEST(StateMachine, DraftApprove) {
    auto t = query::transition(draft(), QueryAction::approve, "alice", 10);
    EXPECT_EQ(t.query.state, QueryState::approved);
    EXPECT_EQ(t.audit.action, AuditAction::query_approved);
    EXPECT_EQ(t.audit.subject_id, "Q-F-2-CM001");
    EXPECT_EQ(t.audit.payload_digest.size(), 64u);
}

TEST(StateMachine, RejectedCannotBeSent) {
    auto q = query::transition(draft(), QueryAction::reject, "alice", 10).query;
    try {
        query::transition(q, QueryAction::send, "alice", 11);
        FAIL();
    } catch (const ConflictError& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("rejected"), std::string::npos) << msg;
        EXPECT_NE(msg.find("send"), std::string::npos) << msg;
    }
}

TEST(StateMachine, EditThenApproveKeepsHistory) {
    auto q = draft();
    const auto original = q.site_text;
    auto edited = query::transition(q, QueryAction::edit, "alice", 10, "Please confirm the start date.").query;
    auto approved = query::transition(edited, QueryAction::approve, "alice", 11).query;
    EXPECT_EQ(approved.state, QueryState::approved);
    ASSERT_EQ(approved.edits.size(), 1u);
    EXPECT_EQ(approved.edits[0].previous_text, original);
    EXPECT_EQ(approved.site_text, "Please confirm the start date.");
    EXPECT_THROW(query::transition(q, QueryAction::edit, "alice", 10), ValidationError);
    EXPECT_THROW(query::transition(q, QueryAction::approve, "", 10), ValidationError);
}

TEST(StateMachine, RandomSequencesReplayFromAudit) {
    Rng rng(2024);
    AuditLog log;
    std::map<std::string, QueryState> finals;
    std::int64_t clock = 0;
    for (int i = 0; i < 1000; ++i) {
        auto f = timing_finding();
        f.finding_id = "F-2-CM" + std::to_string(i);
        auto q = query::suggest_query(f, query::TemplateSet::defaults());
        log.append(++clock, "alice", AuditAction::query_created, q.query_id, nlohmann::json::object());
        const int steps = rng.uniform_int(0, 12);
        for (int s = 0; s < steps; ++s) {
            auto a = query::kAllActions[rng.below(std::size(query::kAllActions))];
            try {
                auto t = query::transition(q, a, "r" + std::to_string(rng.below(3)), ++clock,
                                           "text " + std::to_string(s));
                log.append(t.audit);
                q = t.query;
            } catch (const ConflictError&) {
                EXPECT_FALSE(query::next_state(q.state, a).has_value());
            }
        }
        finals[q.query_id] = q.state;
    }
    std::map<QueryState, int> reached;
    for (const auto& [id, state] : finals) {
        EXPECT_EQ(query::replay_state(log.for_subject(id)), state) << id;
        ++reached[state];
    }
    EXPECT_EQ(finals.size(), 1000u);
    EXPECT_EQ(reached.size(), std::size(query::kAllStates));
}

TEST(StateMachine, ReplayRejectsEntriesBeforeCreation) {
    auto t = query::transition(draft(), QueryAction::approve, "alice", 10);
    EXPECT_THROW(query::replay_state({t.audit}), ValidationError);
}

TEST(Templates, TimingQueryNamesConmedAeAndGap) {
    auto text = query::TemplateSet::defaults().render(timing_finding());
    EXPECT_NE(text.find("ondansetron"), std::string::npos);
    EXPECT_NE(text.find("nausea"), std::string::npos);
    EXPECT_NE(text.find("8 days"), std::string::npos);
    EXPECT_NE(text.find("CM001"), std::string::npos);
    EXPECT_NE(text.find("AE001"), std::string::npos);
}

TEST(Templates, DeterministicText) {
    EXPECT_EQ(draft(), draft());
    EXPECT_EQ(draft().state, QueryState::draft);
    EXPECT_EQ(draft().record_ids, timing_finding().record_ids);
}

TEST(Templates, AllEvidenceIdsCited) {
    auto f = timing_finding();
    f.record_ids = {"CM001", "AE001", "LB007"};
    auto tpl = query::TemplateSet::defaults();
    tpl.set(2, "{{drug}} timing looks wrong.");
    auto text = query::suggest_query(f, tpl).site_text;
    for (const auto& id : f.record_ids)
        EXPECT_NE(text.find(id), std::string::npos) << id;
}

TEST(Templates, MissingPlaceholderValue) {
    auto tpl = query::TemplateSet::defaults();
    tpl.set(2, "{{nonexistent}}");
    EXPECT_THROW(tpl.render(timing_finding()), ValidationError);
}

TEST(Templates, ShippedFilesMatchBuiltIns) {
    auto loaded = query::TemplateSet::load(data_dir() / "templates");
    auto builtin = query::TemplateSet::defaults();
    for (int c = 0; c <= 6; ++c)
        EXPECT_EQ(loaded.text(c), builtin.text(c)) << c;
}

TEST(Templates, EveryDetectorFindingRenders) {
    auto clean = synth::generate_patients(shipped_library(), shipped_kb(), 30, 5);
    synth::InjectionPlan plan;
    plan.seed = 5;
    plan.rate = 0.2;
    auto corrupted = synth::inject_discrepancies(clean, shipped_kb(), plan).corrupted;
    corrupted.conmeds.push_back(conmed("CMX", "zz-unknown", std::nullopt, 5, 6, "nausea", "P0001"));
    auto findings = detect::detect_all(corrupted, shipped_kb()).findings;
    std::set<int> categories;
    for (const auto& f : findings) {
        categories.insert(f.category.value_or(0));
        auto q = query::suggest_query(f, query::TemplateSet::defaults());
        EXPECT_EQ(q.query_id, "Q-" + f.finding_id);
        EXPECT_EQ(q.site_text.find("{{"), std::string::npos);
        for (const auto& id : f.record_ids)
            EXPECT_NE(q.site_text.find(id), std::string::npos) << f.finding_id << " " << id;
    }
    EXPECT_EQ(categories.size(), 7u);
}

TEST(Sessions, DecisionsAccumulate) {
    auto s = query::start_session("S0001", "alice", query::Condition::assisted, 100);
    s = query::record_decision(s, "F-1", query::Verdict::confirm, 110);
    EXPECT_EQ(s.decisions.size(), 1u);
    EXPECT_TRUE(s.decided("F-1"));
    EXPECT_THROW(query::record_decision(s, "F-1", query::Verdict::dismiss, 120), ConflictError);
    EXPECT_THROW(query::record_decision(s, "F-2", query::Verdict::dismiss, 105), ValidationError);
    auto ended = query::end_session(s, 200);
    EXPECT_THROW(query::record_decision(ended, "F-2", query::Verdict::dismiss, 210), ConflictError);
    EXPECT_THROW(query::end_session(ended, 300), ConflictError);
}

TEST(Sessions, JsonRoundTrip) {
    auto s = query::start_session("S0001", "alice", query::Condition::baseline, 100);
    s = query::record_decision(s, "F-1", query::Verdict::dismiss, 110);
    s = query::end_session(s, 150);
    EXPECT_EQ(nlohmann::json(s).get<query::ReviewSession>(), s);
    auto q = query::transition(draft(), QueryAction::edit, "bob", 5, "new").query;
    EXPECT_EQ(nlohmann::json(q).get<query::ReviewQuery>(), q);
}

} // namespace
} // namespace trialqc::test
