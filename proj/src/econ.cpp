#include "trialqc/csv.hpp"
#include "trialqc/econ.hpp"
#include "trialqc/error.hpp"

#include <fstream>
#include <ostream>
#include <utility>

namespace trialqc::econ {

using nlohmann::json;

namespace {

enum class Kind { count, positive, fraction, fold, days };

struct Field {
    std::string name;
    Decimal EconParams::*member;
    Kind kind;
};

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        {"reviewers", &EconParams::reviewers, Kind::count},
        {"hours_per_reviewer_year", &EconParams::hours_per_reviewer_year, Kind::positive},
        {"years", &EconParams::years, Kind::positive},
        {"hourly_rate", &EconParams::hourly_rate, Kind::positive},
        {"efficiency_gain", &EconParams::efficiency_gain, Kind::fold},
        {"data_points", &EconParams::data_points, Kind::count},
        {"query_rate", &EconParams::query_rate, Kind::fraction},
        {"med_reviewer_share", &EconParams::med_reviewer_share, Kind::fraction},
        {"manual_share", &EconParams::manual_share, Kind::fraction},
        {"cost_per_query", &EconParams::cost_per_query, Kind::positive},
        {"false_query_rate", &EconParams::false_query_rate, Kind::fraction},
        {"fp_reduction", &EconParams::fp_reduction, Kind::fold},
        {"dbl_days_baseline", &EconParams::dbl_days_baseline, Kind::positive},
        {"days_saved", &EconParams::days_saved, Kind::days},
        {"revenue_per_day", &EconParams::revenue_per_day, Kind::positive},
        {"ops_cost_per_day", &EconParams::ops_cost_per_day, Kind::positive},
    };
    return f;
}

const Field& find(std::string_view name) {
    for (const auto& f : fields())
        if (f.name == name)
            return f;
    throw ValidationError("unknown economic parameter '" + std::string(name) + "'");
}

Decimal decimal_of(const json& v, const std::string& name) {
    if (v.is_string())
        return Decimal::parse(v.get<std::string>());
    if (v.is_number_integer())
        return Decimal(v.get<long long>());
    if (v.is_number())
        return Decimal::from_double(v.get<double>());
    throw ValidationError("economic parameter '" + name + "' must be a number");
}

json money(Decimal d) { return d.round(2).to_double(); }

std::optional<double> pct(Decimal savings, Decimal traditional) {
    if (traditional == Decimal{})
        return std::nullopt;
    return savings.to_double() / traditional.to_double() * 100.0;
}

} // namespace

const std::vector<std::string>& field_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& f : fields())
            v.push_back(f.name);
        return v;
    }();
    return names;
}

Decimal get_field(const EconParams& p, std::string_view field) { return p.*(find(field).member); }
void set_field(EconParams& p, std::string_view field, Decimal value) { p.*(find(field).member) = value; }

void EconParams::validate() const {
    const Decimal zero{}, one{1};
    for (const auto& f : fields()) {
        const Decimal v = this->*f.member;
        auto bad = [&](const std::string& why) { return ValidationError("economic parameter " + f.name + " " + why); };
        switch (f.kind) {
        case Kind::count:
        case Kind::positive:
            if (v <= zero)
                throw bad("must be positive");
            break;
        case Kind::fraction:
            if (v <= zero || v > one)
                throw bad("must be a fraction in (0, 1]");
            break;
        case Kind::fold:
            if (v < one)
                throw bad("must be a fold change >= 1");
            break;
        case Kind::days:
            if (v < zero)
                throw bad("must not be negative");
            break;
        }
    }
    if (days_saved > dbl_days_baseline)
        throw ValidationError("economic parameter days_saved exceeds dbl_days_baseline");
}

EconParams EconParams::from_json(const json& j) {
    if (!j.is_object())
        throw ValidationError("economic parameters must be a JSON object");
    EconParams p;
    for (const auto& [k, v] : j.items())
        set_field(p, k, decimal_of(v, k));
    p.validate();
    return p;
}

EconParams EconParams::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot read economic parameters: " + path.string());
    try {
        return from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

json EconParams::to_json() const {
    json j = json::object();
    for (const auto& f : fields())
        j[f.name] = (this->*f.member).to_double();
    return j;
}

std::optional<double> CostLine::pct_reduction() const { return pct(savings, traditional); }
std::optional<double> EconReport::pct_reduction() const { return pct(total_savings, total_traditional); }

CostLine review_costs(const EconParams& p) {
    p.validate();
    CostLine c;
    c.name = "medical_review";
    const Decimal hours = p.reviewers * p.hours_per_reviewer_year * p.years;
    c.traditional = hours * p.hourly_rate;
    c.assisted = c.traditional / p.efficiency_gain;
    c.savings = c.traditional - c.assisted;
    return c;
}

CostLine query_costs(const EconParams& p, QueryVolumes* volumes) {
    p.validate();
    QueryVolumes v;
    v.total_queries = p.data_points * p.query_rate * p.med_reviewer_share * p.manual_share;
    v.false_queries = v.total_queries * p.false_query_rate;
    v.remaining_false_queries = v.false_queries / p.fp_reduction;
    CostLine c;
    c.name = "query_management";
    c.traditional = v.total_queries * p.cost_per_query;
    c.savings = (v.false_queries - v.remaining_false_queries) * p.cost_per_query;
    c.assisted = c.traditional - c.savings;
    if (volumes)
        *volumes = v;
    return c;
}

CostLine dblock_costs(const EconParams& p) {
    p.validate();
    const Decimal per_day = p.revenue_per_day + p.ops_cost_per_day;
    CostLine c;
    c.name = "database_lock";
    c.traditional = p.dbl_days_baseline * per_day;
    c.savings = p.days_saved * per_day;
    c.assisted = c.traditional - c.savings;
    return c;
}

EconReport total_report(const EconParams& p) {
    EconReport r;
    r.lines = {review_costs(p), query_costs(p, &r.volumes), dblock_costs(p)};
    for (const auto& l : r.lines) {
        r.total_traditional += l.traditional;
        r.total_assisted += l.assisted;
        r.total_savings += l.savings;
    }
    return r;
}

std::vector<SweepRow> sensitivity_sweep(const EconParams& p, std::string_view field, const std::vector<Decimal>& values) {
    find(field);
    std::vector<SweepRow> rows;
    for (const auto& v : values) {
        EconParams q = p;
        set_field(q, field, v);
        auto r = total_report(q);
        rows.push_back({v, r.total_savings, r.pct_reduction()});
    }
    return rows;
}

json to_json(const EconReport& r) {
    json lines = json::array();
    for (const auto& l : r.lines) {
        auto pr = l.pct_reduction();
        lines.push_back({{"name", l.name},
                         {"traditional", money(l.traditional)},
                         {"assisted", money(l.assisted)},
                         {"savings", money(l.savings)},
                         {"pct_reduction", pr ? json(*pr) : json(nullptr)}});
    }
    auto pr = r.pct_reduction();
    return json{{"lines", lines},
                {"query_volumes",
                 {{"total_queries", r.volumes.total_queries.round(2).to_double()},
                  {"false_queries", r.volumes.false_queries.round(2).to_double()},
                  {"remaining_false_queries", r.volumes.remaining_false_queries.round(2).to_double()}}},
                {"total",
                 {{"traditional", money(r.total_traditional)},
                  {"assisted", money(r.total_assisted)},
                  {"savings", money(r.total_savings)},
                  {"pct_reduction", pr ? json(*pr) : json(nullptr)}}}};
}

void write_csv(std::ostream& out, const EconReport& r) {
    csv::write_row(out, {"line", "traditional", "assisted", "savings", "pct_reduction"});
    auto pct_text = [](std::optional<double> v) {
        return v ? Decimal::from_double(*v).to_string(2) : std::string();
    };
    for (const auto& l : r.lines)
        csv::write_row(out, {l.name, l.traditional.to_string(2), l.assisted.to_string(2), l.savings.to_string(2),
                             pct_text(l.pct_reduction())});
    csv::write_row(out, {"total", r.total_traditional.to_string(2), r.total_assisted.to_string(2),
                         r.total_savings.to_string(2), pct_text(r.pct_reduction())});
}

} // namespace trialqc::econ
