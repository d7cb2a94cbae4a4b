#include "trialqc/dataset_io.hpp"

#include "trialqc/csv.hpp"
#include "trialqc/error.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace trialqc {

namespace fs = std::filesystem;
using nlohmann::json;
using Cell = std::optional<std::string>;

namespace {

const std::vector<std::string_view> kSexValues{"F", "M"};
const std::vector<std::string_view> kCausalityValues{"related", "possibly_related", "not_related"};
const std::vector<std::string_view> kActionValues{"none", "dose_reduced", "dose_interrupted", "drug_withdrawn"};
const std::vector<std::string_view> kAnalyteValues{"hemoglobin", "platelets",  "neutrophils", "alt", "ast",
                                                   "bilirubin",  "creatinine", "potassium",   "bnp"};

using CT = ColumnType;

const std::map<Domain, std::vector<ColumnSpec>>& all_columns() {
    static const std::map<Domain, std::vector<ColumnSpec>> cols{
        {Domain::demographics,
         {{"patient_id", CT::string},
          {"age", CT::integer},
          {"sex", CT::enumeration, false, kSexValues},
          {"enrollment_day", CT::integer}}},
        {Domain::adverse_events,
         {{"ae_id", CT::string},
          {"patient_id", CT::string},
          {"term", CT::string},
          {"narrative", CT::string},
          {"grade", CT::integer},
          {"start_day", CT::integer},
          {"end_day", CT::integer, true},
          {"causality", CT::enumeration, false, kCausalityValues},
          {"action_taken", CT::enumeration, false, kActionValues},
          {"serious", CT::boolean}}},
        {Domain::concomitant_medications,
         {{"cm_id", CT::string},
          {"patient_id", CT::string},
          {"drug_name", CT::string},
          {"indication_text", CT::string},
          {"linked_ae_id", CT::string, true},
          {"start_day", CT::integer},
          {"end_day", CT::integer, true},
          {"dose_text", CT::string}}},
        {Domain::labs,
         {{"lab_id", CT::string},
          {"patient_id", CT::string},
          {"analyte", CT::enumeration, false, kAnalyteValues},
          {"value", CT::number},
          {"units", CT::string},
          {"collection_day", CT::integer},
          {"normal_low", CT::number},
          {"normal_high", CT::number}}},
        {Domain::vitals,
         {{"vs_id", CT::string},
          {"patient_id", CT::string},
          {"day", CT::integer},
          {"weight_kg", CT::number},
          {"systolic_bp", CT::integer},
          {"diastolic_bp", CT::integer}}},
        {Domain::exposure,
         {{"ex_id", CT::string},
          {"patient_id", CT::string},
          {"dose_mg", CT::number},
          {"start_day", CT::integer},
          {"end_day", CT::integer}}},
        {Domain::medical_history,
         {{"mh_id", CT::string}, {"patient_id", CT::string}, {"condition", CT::string}, {"pre_study", CT::boolean}}},
        {Domain::procedures,
         {{"pr_id", CT::string}, {"patient_id", CT::string}, {"name", CT::string}, {"day", CT::integer}}},
    };
    return cols;
}

std::string_view type_name(ColumnType t) {
    switch (t) {
    case CT::string: return "string";
    case CT::integer: return "integer";
    case CT::number: return "number";
    case CT::boolean: return "boolean";
    case CT::enumeration: return "enum";
    }
    return "";
}

class RowReader {
public:
    RowReader(std::string source, std::size_t row, const std::vector<ColumnSpec>& cols, std::vector<Cell> cells)
        : source_(std::move(source)), row_(row), cols_(cols), cells_(std::move(cells)) {}

    [[noreturn]] void fail(std::string_view column, const std::string& msg) const {
        std::ostringstream s;
        s << source_ << ": row " << row_ << ", column " << column << ": " << msg;
        throw ValidationError(s.str());
    }

    const Cell& cell(std::string_view name) const {
        for (std::size_t i = 0; i < cols_.size(); ++i)
            if (cols_[i].name == name)
                return cells_[i];
        fail(name, "unknown column");
    }

    std::string str(std::string_view name) const { return cell(name).value_or(""); }

    std::optional<std::string> opt_str(std::string_view name) const {
        const auto& c = cell(name);
        if (!c || c->empty())
            return std::nullopt;
        return c;
    }

    std::optional<long long> opt_integer(std::string_view name) const {
        auto c = opt_str(name);
        if (!c)
            return std::nullopt;
        long long v = 0;
        auto [p, ec] = std::from_chars(c->data(), c->data() + c->size(), v);
        if (ec != std::errc{} || p != c->data() + c->size())
            fail(name, "not an integer: '" + *c + "'");
        return v;
    }

    long long integer(std::string_view name) const {
        auto v = opt_integer(name);
        if (!v)
            fail(name, "missing value");
        return *v;
    }

    double number(std::string_view name) const {
        auto c = opt_str(name);
        if (!c)
            fail(name, "missing value");
        double v = 0;
        auto [p, ec] = std::from_chars(c->data(), c->data() + c->size(), v);
        if (ec != std::errc{} || p != c->data() + c->size())
            fail(name, "not a number: '" + *c + "'");
        return v;
    }

    bool boolean(std::string_view name) const {
        auto c = str(name);
        if (c == "true")
            return true;
        if (c == "false")
            return false;
        fail(name, "not a boolean: '" + c + "'");
    }

    template <class E, class Parse>
    E enumeration(std::string_view name, Parse parse) const {
        auto c = str(name);
        auto v = parse(c);
        if (!v)
            fail(name, "unknown value '" + c + "'");
        return *v;
    }

private:
    std::string source_;
    std::size_t row_;
    const std::vector<ColumnSpec>& cols_;
    std::vector<Cell> cells_;
};

Cell num(double v) { return csv::format_number(v); }
Cell integer(long long v) { return std::to_string(v); }
Cell boolean(bool v) { return v ? "true" : "false"; }
Cell opt_integer(const std::optional<int>& v) { return v ? integer(*v) : Cell{}; }
Cell text(std::string_view v) { return std::string(v); }

template <class T>
struct Codec;

template <>
struct Codec<Patient> {
    static constexpr Domain domain = Domain::demographics;
    template <class D>
    static auto& list(D& d) { return d.patients; }
    static const std::string& id(const Patient& r) { return r.patient_id; }
    static std::vector<Cell> encode(const Patient& r) {
        return {r.patient_id, integer(r.age), text(to_string(r.sex)), integer(r.enrollment_day)};
    }
    static Patient decode(const RowReader& in) {
        Patient r;
        r.patient_id = in.str("patient_id");
        r.age = static_cast<int>(in.integer("age"));
        if (r.age < 18 || r.age > 120)
            in.fail("age", "age out of range 18–120");
        r.sex = in.enumeration<Sex>("sex", parse_sex);
        r.enrollment_day = static_cast<int>(in.integer("enrollment_day"));
        return r;
    }
};

template <>
struct Codec<AdverseEvent> {
    static constexpr Domain domain = Domain::adverse_events;
    template <class D>
    static auto& list(D& d) { return d.adverse_events; }
    static const std::string& id(const AdverseEvent& r) { return r.ae_id; }
    static std::vector<Cell> encode(const AdverseEvent& r) {
        return {r.ae_id,
                r.patient_id,
                r.term,
                r.narrative,
                integer(r.grade),
                integer(r.start_day),
                opt_integer(r.end_day),
                text(to_string(r.causality)),
                text(to_string(r.action_taken)),
                boolean(r.serious)};
    }
    static AdverseEvent decode(const RowReader& in) {
        AdverseEvent r;
        r.ae_id = in.str("ae_id");
        r.patient_id = in.str("patient_id");
        r.term = in.str("term");
        r.narrative = in.str("narrative");
        auto grade = in.integer("grade");
        if (grade < 1 || grade > 5)
            in.fail("grade", "grade out of range 1–5");
        r.grade = static_cast<int>(grade);
        r.start_day = static_cast<int>(in.integer("start_day"));
        if (auto e = in.opt_integer("end_day")) {
            if (*e < r.start_day)
                in.fail("end_day", "end_day before start_day");
            r.end_day = static_cast<int>(*e);
        }
        r.causality = in.enumeration<Causality>("causality", parse_causality);
        r.action_taken = in.enumeration<ActionTaken>("action_taken", parse_action);
        r.serious = in.boolean("serious");
        return r;
    }
};

template <>
struct Codec<ConcomitantMedication> {
    static constexpr Domain domain = Domain::concomitant_medications;
    template <class D>
    static auto& list(D& d) { return d.conmeds; }
    static const std::string& id(const ConcomitantMedication& r) { return r.cm_id; }
    static std::vector<Cell> encode(const ConcomitantMedication& r) {
        return {r.cm_id,         r.patient_id,          r.drug_name,         r.indication_text,
                r.linked_ae_id, integer(r.start_day), opt_integer(r.end_day), r.dose_text};
    }
    static ConcomitantMedication decode(const RowReader& in) {
        ConcomitantMedication r;
        r.cm_id = in.str("cm_id");
        r.patient_id = in.str("patient_id");
        r.drug_name = in.str("drug_name");
        r.indication_text = in.str("indication_text");
        r.linked_ae_id = in.opt_str("linked_ae_id");
        r.start_day = static_cast<int>(in.integer("start_day"));
        if (auto e = in.opt_integer("end_day")) {
            if (*e < r.start_day)
                in.fail("end_day", "end_day before start_day");
            r.end_day = static_cast<int>(*e);
        }
        r.dose_text = in.str("dose_text");
        return r;
    }
};

template <>
struct Codec<LabResult> {
    static constexpr Domain domain = Domain::labs;
    template <class D>
    static auto& list(D& d) { return d.labs; }
    static const std::string& id(const LabResult& r) { return r.lab_id; }
    static std::vector<Cell> encode(const LabResult& r) {
        return {r.lab_id, r.patient_id, text(to_string(r.analyte)), num(r.value), r.units, integer(r.collection_day),
                num(r.normal_low), num(r.normal_high)};
    }
    static LabResult decode(const RowReader& in) {
        LabResult r;
        r.lab_id = in.str("lab_id");
        r.patient_id = in.str("patient_id");
        r.analyte = in.enumeration<Analyte>("analyte", parse_analyte);
        r.value = in.number("value");
        if (!(r.value >= 0.0))
            in.fail("value", "lab value must be non-negative");
        r.units = in.str("units");
        r.collection_day = static_cast<int>(in.integer("collection_day"));
        r.normal_low = in.number("normal_low");
        r.normal_high = in.number("normal_high");
        if (!(r.normal_low < r.normal_high))
            in.fail("normal_high", "normal_low must be below normal_high");
        return r;
    }
};

template <>
struct Codec<VitalSign> {
    static constexpr Domain domain = Domain::vitals;
    template <class D>
    static auto& list(D& d) { return d.vitals; }
    static const std::string& id(const VitalSign& r) { return r.vs_id; }
    static std::vector<Cell> encode(const VitalSign& r) {
        return {r.vs_id, r.patient_id, integer(r.day), num(r.weight_kg), integer(r.systolic_bp),
                integer(r.diastolic_bp)};
    }
    static VitalSign decode(const RowReader& in) {
        VitalSign r;
        r.vs_id = in.str("vs_id");
        r.patient_id = in.str("patient_id");
        r.day = static_cast<int>(in.integer("day"));
        r.weight_kg = in.number("weight_kg");
        r.systolic_bp = static_cast<int>(in.integer("systolic_bp"));
        r.diastolic_bp = static_cast<int>(in.integer("diastolic_bp"));
        return r;
    }
};

template <>
struct Codec<ExposureRecord> {
    static constexpr Domain domain = Domain::exposure;
    template <class D>
    static auto& list(D& d) { return d.exposures; }
    static const std::string& id(const ExposureRecord& r) { return r.ex_id; }
    static std::vector<Cell> encode(const ExposureRecord& r) {
        return {r.ex_id, r.patient_id, num(r.dose_mg), integer(r.start_day), integer(r.end_day)};
    }
    static ExposureRecord decode(const RowReader& in) {
        ExposureRecord r;
        r.ex_id = in.str("ex_id");
        r.patient_id = in.str("patient_id");
        r.dose_mg = in.number("dose_mg");
        if (r.dose_mg < 0)
            in.fail("dose_mg", "dose must be non-negative");
        r.start_day = static_cast<int>(in.integer("start_day"));
        r.end_day = static_cast<int>(in.integer("end_day"));
        if (r.end_day < r.start_day)
            in.fail("end_day", "end_day before start_day");
        return r;
    }
};

template <>
struct Codec<MedicalHistoryItem> {
    static constexpr Domain domain = Domain::medical_history;
    template <class D>
    static auto& list(D& d) { return d.medical_history; }
    static const std::string& id(const MedicalHistoryItem& r) { return r.mh_id; }
    static std::vector<Cell> encode(const MedicalHistoryItem& r) {
        return {r.mh_id, r.patient_id, r.condition, boolean(r.pre_study)};
    }
    static MedicalHistoryItem decode(const RowReader& in) {
        MedicalHistoryItem r;
        r.mh_id = in.str("mh_id");
        r.patient_id = in.str("patient_id");
        r.condition = in.str("condition");
        r.pre_study = in.boolean("pre_study");
        return r;
    }
};

template <>
struct Codec<Procedure> {
    static constexpr Domain domain = Domain::procedures;
    template <class D>
    static auto& list(D& d) { return d.procedures; }
    static const std::string& id(const Procedure& r) { return r.pr_id; }
    static std::vector<Cell> encode(const Procedure& r) { return {r.pr_id, r.patient_id, r.name, integer(r.day)}; }
    static Procedure decode(const RowReader& in) {
        Procedure r;
        r.pr_id = in.str("pr_id");
        r.patient_id = in.str("patient_id");
        r.name = in.str("name");
        r.day = static_cast<int>(in.integer("day"));
        return r;
    }
};

json cell_to_json(const Cell& c, const ColumnSpec& col) {
    if (!c || (col.nullable && c->empty()))
        return nullptr;
    switch (col.type) {
    case CT::integer: return std::stoll(*c);
    case CT::number: return std::stod(*c);
    case CT::boolean: return *c == "true";
    default: return *c;
    }
}

Cell json_to_cell(const json& v) {
    if (v.is_null())
        return std::nullopt;
    if (v.is_string())
        return v.get<std::string>();
    if (v.is_boolean())
        return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer())
        return std::to_string(v.get<long long>());
    if (v.is_number())
        return csv::format_number(v.get<double>());
    return v.dump();
}

template <class T>
json encode_json(const T& r) {
    const auto& cols = columns(Codec<T>::domain);
    auto cells = Codec<T>::encode(r);
    json j = json::object();
    for (std::size_t i = 0; i < cols.size(); ++i)
        j[std::string(cols[i].name)] = cell_to_json(cells[i], cols[i]);
    return j;
}

template <class T>
T decode_json(const json& j, const std::string& source, std::size_t row) {
    const auto& cols = columns(Codec<T>::domain);
    if (!j.is_object())
        throw ValidationError(source + ": row " + std::to_string(row) + ": expected a JSON object");
    std::vector<Cell> cells;
    for (const auto& c : cols) {
        auto it = j.find(std::string(c.name));
        if (it == j.end()) {
            if (!c.nullable)
                throw ValidationError(source + ": row " + std::to_string(row) + ", column " + std::string(c.name) +
                                      ": missing field");
            cells.emplace_back();
        } else {
            cells.push_back(json_to_cell(*it));
        }
    }
    return Codec<T>::decode(RowReader(source, row, cols, std::move(cells)));
}

template <class T>
void load_domain(StudyDataset& ds, const fs::path& dir) {
    constexpr Domain d = Codec<T>::domain;
    const auto& cols = columns(d);
    auto csv_path = dir / file_name(d, "csv");
    auto nd_path = dir / file_name(d, "ndjson");
    auto record = [&](T r, const std::string& file, std::size_t row) {
        const auto& rid = Codec<T>::id(r);
        if (!ds.provenance.emplace(rid, Provenance{file, row}).second)
            throw ValidationError(file + ": row " + std::to_string(row) + ": duplicate record id " + rid);
        Codec<T>::list(ds).push_back(std::move(r));
    };

    if (fs::exists(csv_path)) {
        std::ifstream in(csv_path, std::ios::binary);
        if (!in)
            throw IoError("cannot open " + csv_path.string());
        auto file = file_name(d, "csv");
        auto table = csv::read(in, file);
        std::vector<std::size_t> index;
        for (const auto& c : cols) {
            auto it = std::find(table.header.begin(), table.header.end(), c.name);
            if (it == table.header.end())
                throw ValidationError(file + ": missing column " + std::string(c.name));
            index.push_back(static_cast<std::size_t>(it - table.header.begin()));
        }
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            std::vector<Cell> cells;
            for (auto i : index) {
                const auto& v = table.rows[r][i];
                cells.push_back(v);
            }
            record(Codec<T>::decode(RowReader(file, r + 1, cols, std::move(cells))), file, r + 1);
        }
        return;
    }
    if (fs::exists(nd_path)) {
        std::ifstream in(nd_path, std::ios::binary);
        if (!in)
            throw IoError("cannot open " + nd_path.string());
        auto file = file_name(d, "ndjson");
        std::string line;
        std::size_t row = 0;
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos)
                continue;
            ++row;
            json j;
            try {
                j = json::parse(line);
            } catch (const json::parse_error& e) {
                throw ValidationError(file + ": row " + std::to_string(row) + ": " + e.what());
            }
            record(decode_json<T>(j, file, row), file, row);
        }
        return;
    }
    throw IoError("missing domain file " + csv_path.string());
}

template <class T>
void write_domain(const StudyDataset& ds, const fs::path& dir, ExportFormat fmt) {
    constexpr Domain d = Codec<T>::domain;
    const auto& cols = columns(d);
    auto path = dir / file_name(d, fmt == ExportFormat::csv ? "csv" : "ndjson");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    auto sorted = Codec<T>::list(ds);
    std::sort(sorted.begin(), sorted.end(),
              [](const T& a, const T& b) { return Codec<T>::id(a) < Codec<T>::id(b); });
    if (fmt == ExportFormat::csv) {
        std::vector<std::string> header;
        for (const auto& c : cols)
            header.emplace_back(c.name);
        csv::write_row(out, header);
        for (const auto& r : sorted) {
            std::vector<std::string> fields;
            for (auto& c : Codec<T>::encode(r))
                fields.push_back(c.value_or(""));
            csv::write_row(out, fields);
        }
    } else {
        for (const auto& r : sorted)
            out << encode_json(r).dump() << '\n';
    }
    if (!out)
        throw IoError("write failed: " + path.string());
}

} // namespace

const std::vector<ColumnSpec>& columns(Domain d) { return all_columns().at(d); }

std::string file_name(Domain d, std::string_view extension) {
    return std::string(to_string(d)) + "." + std::string(extension);
}

json data_dictionary() {
    json domains = json::array();
    for (auto d : kAllDomains) {
        json cols = json::array();
        for (const auto& c : columns(d)) {
            json col{{"name", c.name}, {"type", type_name(c.type)}, {"nullable", c.nullable}};
            if (!c.allowed.empty())
                col["values"] = c.allowed;
            cols.push_back(std::move(col));
        }
        domains.push_back({{"domain", to_string(d)}, {"file", file_name(d)}, {"columns", std::move(cols)}});
    }
    return {{"version", 1}, {"delimiter", ","}, {"encoding", "UTF-8"}, {"domains", std::move(domains)}};
}

StudyDataset import_dataset(const fs::path& dir) {
    if (!fs::is_directory(dir))
        throw IoError("not a directory: " + dir.string());
    StudyDataset ds;
    load_domain<Patient>(ds, dir);
    load_domain<AdverseEvent>(ds, dir);
    load_domain<ConcomitantMedication>(ds, dir);
    load_domain<LabResult>(ds, dir);
    load_domain<VitalSign>(ds, dir);
    load_domain<ExposureRecord>(ds, dir);
    load_domain<MedicalHistoryItem>(ds, dir);
    load_domain<Procedure>(ds, dir);
    validate(ds);
    return ds;
}

void export_dataset(const StudyDataset& ds, const fs::path& dir, ExportFormat fmt) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw IoError("cannot create directory " + dir.string());
    write_domain<Patient>(ds, dir, fmt);
    write_domain<AdverseEvent>(ds, dir, fmt);
    write_domain<ConcomitantMedication>(ds, dir, fmt);
    write_domain<LabResult>(ds, dir, fmt);
    write_domain<VitalSign>(ds, dir, fmt);
    write_domain<ExposureRecord>(ds, dir, fmt);
    write_domain<MedicalHistoryItem>(ds, dir, fmt);
    write_domain<Procedure>(ds, dir, fmt);
}

#define TRIALQC_JSON_CODEC(T)                                                                                         \
    void to_json(json& j, const T& r) { j = encode_json(r); }                                                         \
    void from_json(const json& j, T& r) { r = decode_json<T>(j, "json", 1); }

TRIALQC_JSON_CODEC(Patient)
TRIALQC_JSON_CODEC(AdverseEvent)
TRIALQC_JSON_CODEC(ConcomitantMedication)
TRIALQC_JSON_CODEC(LabResult)
TRIALQC_JSON_CODEC(VitalSign)
TRIALQC_JSON_CODEC(ExposureRecord)
TRIALQC_JSON_CODEC(MedicalHistoryItem)
TRIALQC_JSON_CODEC(Procedure)

#undef TRIALQC_JSON_CODEC

} // namespace trialqc
