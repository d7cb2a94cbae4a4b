#pragma once

#include "trialqc/records.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace trialqc::kb {

enum class Direction { below, above };

std::string_view to_string(Direction d);

struct DrugMonograph {
    std::string name; // normalized
    std::set<std::string> indications;
    std::string drug_class;
    bool hepatotoxic = false;
    bool treats_nothing = false; // placebo-like
};

/// Lab thresholds for grades 1..k (k <= 4), strictly monotone in the rule's direction.
struct GradingRule {
    std::string ae_term;
    Analyte analyte = Analyte::hemoglobin;
    Direction direction = Direction::below;
    std::vector<double> thresholds;
};

struct ProgressionTrigger {
    enum class Kind { study_drug_exposure, drug_class };
    Kind kind = Kind::study_drug_exposure;
    std::string drug_class; // for Kind::drug_class
};

/// A lab change that is clinically anticipated after a trigger and should not be flagged.
struct ExpectedProgression {
    ProgressionTrigger trigger;
    Analyte analyte = Analyte::platelets;
    Direction direction = Direction::below;
    int window_days = 1;
};

struct SeverityCue {
    std::string keyword;
    int min_grade = 1;
};

struct ReferenceRange {
    double low = 0;
    double high = 0;
    std::string units;
};

/// Canonical term -> surface forms, matched case-insensitively.
class SynonymTable {
public:
    /// Throws ValidationError if a surface form is already claimed by another term.
    void add(const std::string& canonical, const std::vector<std::string>& forms);
    std::optional<std::string> lookup(std::string_view text) const;
    bool is_canonical(std::string_view term) const { return canonical_.count(std::string(term)) > 0; }
    const std::set<std::string>& canonical_terms() const noexcept { return canonical_; }
    std::vector<std::string> forms_of(std::string_view canonical) const;

private:
    std::map<std::string, std::string, std::less<>> surface_;
    std::set<std::string> canonical_;
};

/// Lowercase, trim, collapse internal whitespace.
std::string fold(std::string_view text);

enum class Indication { indicated, not_indicated, unknown_drug };

struct LabGrade {
    enum class Status { graded, within_normal, not_gradeable };
    Status status = Status::not_gradeable;
    int grade = 0;

    bool graded() const noexcept { return status == Status::graded; }
};

/// Curated clinical reference data. Immutable after load.
class KnowledgeBase {
public:
    static KnowledgeBase from_json(const nlohmann::json& j);
    static KnowledgeBase load(const std::filesystem::path& path);

    const std::string& version() const noexcept { return version_; }

    /// Canonical term or nullopt when unknown. Idempotent.
    std::optional<std::string> normalize_term(std::string_view text) const;
    std::string normalize_drug(std::string_view name) const;

    const DrugMonograph* drug(std::string_view name) const;
    Indication indicated_for(std::string_view drug_name, std::string_view ae_term) const;

    const GradingRule* grading_rule(std::string_view ae_term) const;
    /// Grading rules keyed by analyte; used to relate labs back to AE terms.
    std::vector<const GradingRule*> rules_for(Analyte analyte) const;
    LabGrade grade_from_lab(std::string_view ae_term, double value) const;
    static LabGrade grade_with(const GradingRule& rule, double value);

    /// Highest minimum grade implied by severity keywords in `narrative`; 0 if none.
    int narrative_min_grade(std::string_view narrative) const;

    bool is_study_drug_toxicity(std::string_view ae_term) const;
    const std::string& study_drug() const noexcept { return study_drug_; }

    const std::vector<ExpectedProgression>& progressions() const noexcept { return progressions_; }
    const std::vector<SeverityCue>& severity_cues() const noexcept { return cues_; }
    const std::vector<GradingRule>& grading_rules() const noexcept { return rules_; }
    const std::map<std::string, DrugMonograph, std::less<>>& drugs() const noexcept { return drugs_; }
    const SynonymTable& synonyms() const noexcept { return synonyms_; }

    const ReferenceRange& reference_range(Analyte a) const;

    /// Drugs (sorted by name) indicated for `term`, excluding placebo-like entries.
    std::vector<std::string> drugs_indicated_for(std::string_view term) const;

private:
    std::string version_;
    SynonymTable synonyms_;
    std::map<std::string, DrugMonograph, std::less<>> drugs_;
    std::map<std::string, std::string, std::less<>> drug_aliases_;
    std::vector<GradingRule> rules_;
    std::vector<ExpectedProgression> progressions_;
    std::vector<SeverityCue> cues_;
    std::map<Analyte, ReferenceRange> ranges_;
    std::string study_drug_;
    std::set<std::string> toxicities_;
};

} // namespace trialqc::kb
