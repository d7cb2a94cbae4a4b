#pragma once

#include "trialqc/knowledge_base.hpp"
#include "trialqc/random.hpp"
#include "trialqc/records.hpp"
#include "trialqc/tolerances.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace trialqc::synth {

enum class LibraryDomain { adverse_events, conmeds, procedures, medical_history };

std::string_view to_string(LibraryDomain d);

struct WeightedElement {
    std::string element;
    double weight = 0; // occurrence count in the source data

    friend bool operator==(const WeightedElement&, const WeightedElement&) = default;
};

/// Unique clinical elements per domain, weighted by occurrence.
struct ElementLibrary {
    std::map<LibraryDomain, std::vector<WeightedElement>> domains;

    /// Throws ValidationError on an empty domain or non-positive weight.
    void validate() const;
    const std::vector<WeightedElement>& at(LibraryDomain d) const;

    nlohmann::json to_json() const;
    static ElementLibrary from_json(const nlohmann::json& j);
    static ElementLibrary load(const std::filesystem::path& path);
};

/// Counts each unique AE term, conmed drug, procedure and history condition.
/// Throws ValidationError naming the first empty domain.
ElementLibrary build_libraries(const StudyDataset& source);

/// Draws indices with probability proportional to weight.
class WeightedSampler {
public:
    explicit WeightedSampler(std::vector<double> weights);
    std::size_t sample(Rng& rng) const;
    std::size_t size() const noexcept { return weights_.size(); }

private:
    std::vector<double> weights_;
};

struct GeneratorConfig {
    int cycles = 4;
    int cycle_days = 21;
    double base_dose_mg = 100.0;
    int min_adverse_events = 2;
    int max_adverse_events = 5;
    double treat_probability = 0.75;     // chance an AE with an indicated drug gets a conmed
    double dose_action_probability = 0.35; // chance a patient has one AE with a dose action
    Tolerances tolerances;

    StudyDay last_day() const { return cycles * cycle_days; }
};

/// Samples `n` synthetic patients from the libraries and applies the coherence pass
/// (labs graded to match lab-gradeable AEs, narratives matching grades, conmeds inside
/// the AE window they treat, causality and dose actions consistent with exposure).
/// Deterministic for a fixed seed; each patient draws from its own derived stream.
StudyDataset generate_patients(const ElementLibrary& lib, const kb::KnowledgeBase& kb, int n, std::uint64_t seed,
                               const GeneratorConfig& cfg = {});

/// Applies manual refinements: `{"patches":[{"record_id":..., "set":{field: value}}]}`.
/// The result is re-validated.
void apply_overlay(StudyDataset& ds, const nlohmann::json& overlay);

// ---------------------------------------------------------------------------
// Discrepancy injection

inline constexpr int kCategoryCount = 6;

struct GroundTruthAnnotation {
    std::string record_id;
    std::string patient_id;
    int category = 1;
    std::string transform;
    nlohmann::json original_value;  // fields as they were; may carry "restore_labs"
    nlohmann::json corrupted_value; // fields as written; may carry "removed_lab_ids"

    friend bool operator==(const GroundTruthAnnotation&, const GroundTruthAnnotation&) = default;
};

void to_json(nlohmann::json& j, const GroundTruthAnnotation& a);
void from_json(const nlohmann::json& j, GroundTruthAnnotation& a);

struct InjectionPlan {
    double rate = 0.10;
    std::uint64_t seed = 0;
    std::array<double, kCategoryCount> category_weights{1, 1, 1, 1, 1, 1};
    Tolerances tolerances;
};

struct InjectionResult {
    StudyDataset corrupted;
    std::vector<GroundTruthAnnotation> truth;
    std::size_t eligible_points = 0;
    std::array<int, kCategoryCount> requested{};
    std::vector<std::string> warnings;
};

/// Records in the AE, conmed, exposure and lab domains.
std::size_t eligible_points(const StudyDataset& ds);

/// Splits `total` across categories by weight (largest remainder); counts differ by at
/// most one when weights are equal.
std::array<int, kCategoryCount> allocate(int total, const std::array<double, kCategoryCount>& weights);

/// Corrupts round(rate x eligible) records, stratified across the six categories.
/// `clean` is not modified.
InjectionResult inject_discrepancies(const StudyDataset& clean, const kb::KnowledgeBase& kb,
                                     const InjectionPlan& plan);

/// Applies each annotation's original values to undo the corruption.
StudyDataset revert(const StudyDataset& corrupted, const std::vector<GroundTruthAnnotation>& truth);

/// Truth file: plan, eligible count and annotations.
nlohmann::json truth_to_json(const InjectionResult& r, const InjectionPlan& plan);
std::vector<GroundTruthAnnotation> truth_from_json(const nlohmann::json& j);

} // namespace trialqc::synth
