#pragma once

#include "trialqc/decimal.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace trialqc::econ {

struct EconParams {
    // medical review labor
    Decimal reviewers{3};
    Decimal hours_per_reviewer_year{175};
    Decimal years{4};
    Decimal hourly_rate{300};
    Decimal efficiency_gain{3};
    // query management
    Decimal data_points{4'341'900};
    Decimal query_rate = Decimal::parse("0.073");
    Decimal med_reviewer_share = Decimal::parse("0.0813");
    Decimal manual_share = Decimal::parse("0.20");
    Decimal cost_per_query = Decimal::parse("126.50");
    Decimal false_query_rate = Decimal::parse("0.49");
    Decimal fp_reduction{10};
    // database lock
    Decimal dbl_days_baseline = Decimal::parse("36.8");
    Decimal days_saved{5};
    Decimal revenue_per_day{840'000};
    Decimal ops_cost_per_day{40'000};

    /// Throws ValidationError naming the first invalid field.
    void validate() const;

    /// Missing fields keep their defaults; unknown fields are rejected.
    static EconParams from_json(const nlohmann::json& j);
    static EconParams load(const std::filesystem::path& path);
    nlohmann::json to_json() const;
};

/// Names of the numeric fields, in declaration order.
const std::vector<std::string>& field_names();
Decimal get_field(const EconParams& p, std::string_view field);
void set_field(EconParams& p, std::string_view field, Decimal value);

struct CostLine {
    std::string name;
    Decimal traditional;
    Decimal assisted;
    Decimal savings; // traditional - assisted
    std::optional<double> pct_reduction() const;
};

struct QueryVolumes {
    Decimal total_queries;
    Decimal false_queries;
    Decimal remaining_false_queries;
};

CostLine review_costs(const EconParams& p);
CostLine query_costs(const EconParams& p, QueryVolumes* volumes = nullptr);
CostLine dblock_costs(const EconParams& p);

struct EconReport {
    std::vector<CostLine> lines; // review, queries, database lock
    QueryVolumes volumes;
    Decimal total_traditional;
    Decimal total_assisted;
    Decimal total_savings;
    std::optional<double> pct_reduction() const;
};

EconReport total_report(const EconParams& p);

struct SweepRow {
    Decimal value;
    Decimal total_savings;
    std::optional<double> pct_reduction;
};

/// One total per value of `field`; other parameters fixed.
std::vector<SweepRow> sensitivity_sweep(const EconParams& p, std::string_view field, const std::vector<Decimal>& values);

nlohmann::json to_json(const EconReport& r);
void write_csv(std::ostream& out, const EconReport& r);

} // namespace trialqc::econ
