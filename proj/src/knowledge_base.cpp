#include "trialqc/knowledge_base.hpp"

#include "trialqc/error.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

namespace trialqc::kb {

using nlohmann::json;

std::string_view to_string(Direction d) { return d == Direction::below ? "below" : "above"; }

std::string fold(std::string_view text) {
    std::string out;
    bool pending_space = false;
    for (char c : text) {
        auto uc = static_cast<unsigned char>(c);
        if (std::isspace(uc)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(uc)));
    }
    return out;
}

void SynonymTable::add(const std::string& canonical, const std::vector<std::string>& forms) {
    auto canon = fold(canonical);
    auto claim = [&](const std::string& form) {
        auto key = fold(form);
        auto [it, inserted] = surface_.emplace(key, canon);
        if (!inserted && it->second != canon)
            throw ValidationError("synonym '" + form + "' maps to both '" + it->second + "' and '" + canon + "'");
    };
    canonical_.insert(canon);
    claim(canon);
    for (const auto& f : forms)
        claim(f);
}

std::optional<std::string> SynonymTable::lookup(std::string_view text) const {
    auto it = surface_.find(fold(text));
    if (it == surface_.end())
        return std::nullopt;
    return it->second;
}

std::vector<std::string> SynonymTable::forms_of(std::string_view canonical) const {
    std::vector<std::string> out;
    for (const auto& [form, canon] : surface_)
        if (canon == canonical && form != canonical)
            out.push_back(form);
    return out;
}

namespace {

Direction parse_direction(const std::string& s) {
    if (s == "below")
        return Direction::below;
    if (s == "above")
        return Direction::above;
    throw ValidationError("knowledge base: unknown direction '" + s + "'");
}

Analyte require_analyte(const std::string& s) {
    auto a = parse_analyte(s);
    if (!a)
        throw ValidationError("knowledge base: unknown analyte '" + s + "'");
    return *a;
}

} // namespace

KnowledgeBase KnowledgeBase::from_json(const json& j) {
    KnowledgeBase kb;
    try {
        kb.version_ = j.value("version", "unversioned");
        for (const auto& [canonical, forms] : j.at("synonyms").items())
            kb.synonyms_.add(canonical, forms.get<std::vector<std::string>>());

        auto canonical_term = [&](const std::string& t, const std::string& where) {
            auto n = kb.synonyms_.lookup(t);
            if (!n)
                throw ValidationError("knowledge base: " + where + " references unknown term '" + t + "'");
            return *n;
        };

        for (const auto& d : j.at("drugs")) {
            DrugMonograph m;
            m.name = fold(d.at("name").get<std::string>());
            for (const auto& t : d.value("indications", std::vector<std::string>{}))
                m.indications.insert(canonical_term(t, "drug " + m.name));
            m.drug_class = d.value("class", "");
            m.hepatotoxic = d.value("hepatotoxic", false);
            m.treats_nothing = d.value("treats_nothing", false);
            if (m.treats_nothing && !m.indications.empty())
                throw ValidationError("knowledge base: placebo-like drug '" + m.name + "' lists indications");
            for (const auto& alias : d.value("aliases", std::vector<std::string>{}))
                if (!kb.drug_aliases_.emplace(fold(alias), m.name).second)
                    throw ValidationError("knowledge base: duplicate drug alias '" + alias + "'");
            auto name = m.name;
            if (!kb.drugs_.emplace(name, std::move(m)).second)
                throw ValidationError("knowledge base: duplicate drug '" + name + "'");
        }
        for (const auto& [alias, name] : kb.drug_aliases_)
            if (kb.drugs_.count(alias))
                throw ValidationError("knowledge base: alias '" + alias + "' collides with a drug name");

        for (const auto& [code, r] : j.at("reference_ranges").items()) {
            ReferenceRange range{r.at("low").get<double>(), r.at("high").get<double>(), r.value("units", "")};
            if (!(range.low < range.high))
                throw ValidationError("knowledge base: reference range for " + code + " is empty");
            kb.ranges_[require_analyte(code)] = range;
        }

        for (const auto& r : j.at("grading_rules")) {
            GradingRule rule;
            rule.ae_term = canonical_term(r.at("ae_term").get<std::string>(), "grading rule");
            rule.analyte = require_analyte(r.at("analyte").get<std::string>());
            rule.direction = parse_direction(r.at("direction").get<std::string>());
            rule.thresholds = r.at("thresholds").get<std::vector<double>>();
            if (rule.thresholds.empty() || rule.thresholds.size() > 4)
                throw ValidationError("knowledge base: rule for " + rule.ae_term + " needs 1 to 4 thresholds");
            for (std::size_t i = 1; i < rule.thresholds.size(); ++i) {
                bool ok = rule.direction == Direction::below ? rule.thresholds[i] < rule.thresholds[i - 1]
                                                             : rule.thresholds[i] > rule.thresholds[i - 1];
                if (!ok)
                    throw ValidationError("knowledge base: thresholds for " + rule.ae_term + " are not monotone");
            }
            if (kb.grading_rule(rule.ae_term))
                throw ValidationError("knowledge base: duplicate grading rule for " + rule.ae_term);
            kb.rules_.push_back(std::move(rule));
        }

        for (const auto& p : j.at("expected_progressions")) {
            ExpectedProgression e;
            const auto& trig = p.at("trigger");
            auto kind = trig.at("kind").get<std::string>();
            if (kind == "study_drug_exposure") {
                e.trigger.kind = ProgressionTrigger::Kind::study_drug_exposure;
            } else if (kind == "drug_class") {
                e.trigger.kind = ProgressionTrigger::Kind::drug_class;
                e.trigger.drug_class = trig.at("class").get<std::string>();
            } else {
                throw ValidationError("knowledge base: unknown progression trigger '" + kind + "'");
            }
            e.analyte = require_analyte(p.at("analyte").get<std::string>());
            e.direction = parse_direction(p.at("direction").get<std::string>());
            e.window_days = p.at("window_days").get<int>();
            if (e.window_days <= 0)
                throw ValidationError("knowledge base: progression window must be positive");
            kb.progressions_.push_back(std::move(e));
        }

        for (const auto& c : j.at("severity_cues")) {
            SeverityCue cue{fold(c.at("keyword").get<std::string>()), c.at("min_grade").get<int>()};
            if (cue.min_grade < 1 || cue.min_grade > 5)
                throw ValidationError("knowledge base: severity cue grade out of range 1–5");
            kb.cues_.push_back(std::move(cue));
        }

        const auto& sd = j.at("study_drug");
        kb.study_drug_ = fold(sd.at("name").get<std::string>());
        for (const auto& t : sd.at("toxicities").get<std::vector<std::string>>())
            kb.toxicities_.insert(canonical_term(t, "study drug toxicity"));
    } catch (const json::exception& e) {
        throw ValidationError(std::string("knowledge base: ") + e.what());
    }
    return kb;
}

KnowledgeBase KnowledgeBase::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open knowledge base " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(path.filename().string() + ": " + e.what());
    }
    return from_json(j);
}

std::optional<std::string> KnowledgeBase::normalize_term(std::string_view text) const {
    return synonyms_.lookup(text);
}

std::string KnowledgeBase::normalize_drug(std::string_view name) const {
    auto n = fold(name);
    auto it = drug_aliases_.find(n);
    return it == drug_aliases_.end() ? n : it->second;
}

const DrugMonograph* KnowledgeBase::drug(std::string_view name) const {
    auto it = drugs_.find(normalize_drug(name));
    return it == drugs_.end() ? nullptr : &it->second;
}

Indication KnowledgeBase::indicated_for(std::string_view drug_name, std::string_view ae_term) const {
    const auto* m = drug(drug_name);
    if (!m)
        return Indication::unknown_drug;
    auto term = normalize_term(ae_term);
    return term && m->indications.count(*term) ? Indication::indicated : Indication::not_indicated;
}

const GradingRule* KnowledgeBase::grading_rule(std::string_view ae_term) const {
    auto term = normalize_term(ae_term);
    if (!term)
        return nullptr;
    for (const auto& r : rules_)
        if (r.ae_term == *term)
            return &r;
    return nullptr;
}

std::vector<const GradingRule*> KnowledgeBase::rules_for(Analyte analyte) const {
    std::vector<const GradingRule*> out;
    for (const auto& r : rules_)
        if (r.analyte == analyte)
            out.push_back(&r);
    return out;
}

LabGrade KnowledgeBase::grade_with(const GradingRule& rule, double value) {
    int grade = 0;
    for (double t : rule.thresholds) {
        bool crossed = rule.direction == Direction::below ? value < t : value > t;
        if (!crossed)
            break;
        ++grade;
    }
    if (grade == 0)
        return {LabGrade::Status::within_normal, 0};
    return {LabGrade::Status::graded, grade};
}

LabGrade KnowledgeBase::grade_from_lab(std::string_view ae_term, double value) const {
    const auto* rule = grading_rule(ae_term);
    if (!rule)
        return {LabGrade::Status::not_gradeable, 0};
    return grade_with(*rule, value);
}

int KnowledgeBase::narrative_min_grade(std::string_view narrative) const {
    auto text = fold(narrative);
    auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
    int best = 0;
    for (const auto& cue : cues_) {
        for (auto pos = text.find(cue.keyword); pos != std::string::npos; pos = text.find(cue.keyword, pos + 1)) {
            auto end = pos + cue.keyword.size();
            bool left = pos == 0 || !is_word(text[pos - 1]);
            bool right = end == text.size() || !is_word(text[end]);
            if (left && right) {
                best = std::max(best, cue.min_grade);
                break;
            }
        }
    }
    return best;
}

bool KnowledgeBase::is_study_drug_toxicity(std::string_view ae_term) const {
    auto term = normalize_term(ae_term);
    return term && toxicities_.count(*term);
}

const ReferenceRange& KnowledgeBase::reference_range(Analyte a) const {
    auto it = ranges_.find(a);
    if (it == ranges_.end())
        throw NotFoundError("no reference range for " + std::string(trialqc::to_string(a)));
    return it->second;
}

std::vector<std::string> KnowledgeBase::drugs_indicated_for(std::string_view term) const {
    std::vector<std::string> out;
    auto canon = normalize_term(term);
    if (!canon)
        return out;
    for (const auto& [name, m] : drugs_)
        if (!m.treats_nothing && m.indications.count(*canon))
            out.push_back(name);
    return out;
}

} // namespace trialqc::kb
