#include "trialqc/context.hpp"
#include "trialqc/dataset_io.hpp"
#include "trialqc/detector.hpp"
#include "trialqc/econ.hpp"
#include "trialqc/error.hpp"
#include "trialqc/http_api.hpp"
#include "trialqc/resources.hpp"
#include "trialqc/scoring.hpp"
#include "trialqc/synth.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace trialqc;

namespace {

json read_json_file(const fs::path& p) {
    std::ifstream in(p);
    if (!in)
        throw IoError("cannot read " + p.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(p.string() + ": " + e.what());
    }
}

void write_text(const fs::path& p, const std::string& text) {
    if (p.has_parent_path())
        fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + p.string());
    out << text;
}

std::vector<detect::Finding> read_findings(const fs::path& p) {
    std::ifstream in(p);
    if (!in)
        throw IoError("cannot read " + p.string());
    std::vector<detect::Finding> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty())
            continue;
        try {
            out.push_back(json::parse(line).get<detect::Finding>());
        } catch (const json::exception& e) {
            throw ValidationError(p.string() + ": line " + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

struct Common {
    bool json_out = false;
    std::string kb_path;

    kb::KnowledgeBase kb() const {
        return kb::KnowledgeBase::load(kb_path.empty() ? resource_dir() / "knowledge_base.json" : fs::path(kb_path));
    }
};

void emit(const Common& c, const json& summary, const std::string& human) {
    if (c.json_out)
        std::cout << summary.dump(2) << '\n';
    else if (!human.empty())
        std::cout << human << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"trialqc: synthetic CRF generation, discrepancy detection, evaluation and economics"};
    app.require_subcommand(1);
    Common common;
    app.add_flag("--json", common.json_out, "Print machine-readable JSON");
    app.add_option("--kb", common.kb_path, "Knowledge base JSON (default: shipped)");

    // generate
    auto* gen = app.add_subcommand("generate", "Generate a synthetic study corpus");
    int gen_n = 50;
    std::uint64_t gen_seed = 42;
    std::string gen_lib, gen_out, gen_overlay, gen_format = "csv";
    gen->add_option("--patients,-n", gen_n, "Number of patients")->check(CLI::PositiveNumber);
    gen->add_option("--seed", gen_seed, "Random seed");
    gen->add_option("--library", gen_lib, "Element library JSON (default: shipped)");
    gen->add_option("--overlay", gen_overlay, "Manual refinement patches");
    gen->add_option("--format", gen_format, "csv or ndjson")->check(CLI::IsMember({"csv", "ndjson"}));
    gen->add_option("--out,-o", gen_out, "Output directory")->required();

    // build-library
    auto* lib = app.add_subcommand("build-library", "Build an element library from a source corpus");
    std::string lib_src, lib_out;
    lib->add_option("--source", lib_src, "Source corpus directory")->required();
    lib->add_option("--out,-o", lib_out, "Output JSON")->required();

    // inject
    auto* inj = app.add_subcommand("inject", "Inject labelled discrepancies into a clean corpus");
    std::string inj_in, inj_out, inj_truth;
    double inj_rate = 0.10;
    std::uint64_t inj_seed = 42;
    std::vector<double> inj_weights;
    inj->add_option("--in,-i", inj_in, "Clean corpus directory")->required();
    inj->add_option("--out,-o", inj_out, "Corrupted corpus directory")->required();
    inj->add_option("--truth", inj_truth, "Ground-truth JSON")->required();
    inj->add_option("--rate", inj_rate, "Fraction of eligible records to corrupt")->check(CLI::Range(0.0, 1.0));
    inj->add_option("--seed", inj_seed, "Random seed");
    inj->add_option("--weights", inj_weights, "Six category weights")->expected(6)->delimiter(',');

    // detect
    auto* det = app.add_subcommand("detect", "Run the discrepancy checks");
    std::string det_in, det_out, det_assistant;
    bool det_stub = false;
    int det_timeout = 5000;
    int det_inflight = 4;
    det->add_option("--in,-i", det_in, "Corpus directory")->required();
    det->add_option("--out,-o", det_out, "Findings NDJSON")->required();
    auto* det_url = det->add_option("--assistant", det_assistant, "Assistant base URL (POST /adjudicate)");
    det->add_flag("--assistant-stub", det_stub, "Use the built-in deterministic assistant")->excludes(det_url);
    det->add_option("--assistant-timeout-ms", det_timeout, "Per-request timeout")->check(CLI::PositiveNumber);
    det->add_option("--max-in-flight", det_inflight, "Concurrent assistant requests")->check(CLI::PositiveNumber);

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Score findings against ground truth");
    std::string ev_findings, ev_truth, ev_report;
    ev->add_option("--findings", ev_findings, "Findings NDJSON")->required();
    ev->add_option("--truth", ev_truth, "Ground-truth JSON")->required();
    ev->add_option("--report", ev_report, "Report JSON")->required();

    // econ
    auto* ec = app.add_subcommand("econ", "Economic model report");
    std::string ec_params, ec_out, ec_sweep;
    std::vector<std::string> ec_values;
    ec->add_option("--params", ec_params, "Parameter JSON (default: shipped)");
    ec->add_option("--out,-o", ec_out, "Report path (.json or .csv)");
    ec->add_option("--sweep", ec_sweep, "Parameter to sweep");
    ec->add_option("--values", ec_values, "Sweep values")->delimiter(',');

    // serve
    auto* srv = app.add_subcommand("serve", "Run the review HTTP service");
    std::string srv_config, srv_data, srv_host;
    int srv_port = -1;
    srv->add_option("--config", srv_config, "Service config JSON");
    srv->add_option("--data-dir", srv_data, "Data directory");
    srv->add_option("--host", srv_host, "Listen address");
    srv->add_option("--port", srv_port, "Listen port");

    // context dump
    auto* ctx = app.add_subcommand("context", "Context engine tools");
    auto* dump = ctx->add_subcommand("dump", "Timeline, associations and scores for one patient (NDJSON)");
    ctx->require_subcommand(1);
    std::string dump_in, dump_patient, dump_out;
    dump->add_option("--in,-i", dump_in, "Corpus directory")->required();
    dump->add_option("--patient", dump_patient, "Patient id")->required();
    dump->add_option("--out,-o", dump_out, "Output NDJSON (default: stdout)");

    // dictionary
    auto* dict = app.add_subcommand("dictionary", "Write the data dictionary");
    std::string dict_out;
    dict->add_option("--out,-o", dict_out, "Output JSON (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            auto library = synth::ElementLibrary::load(gen_lib.empty() ? resource_dir() / "element_library.json"
                                                                       : fs::path(gen_lib));
            auto ds = synth::generate_patients(library, common.kb(), gen_n, gen_seed);
            if (!gen_overlay.empty())
                synth::apply_overlay(ds, read_json_file(gen_overlay));
            export_dataset(ds, gen_out, gen_format == "csv" ? ExportFormat::csv : ExportFormat::ndjson);
            emit(common,
                 {{"patients", ds.patients.size()},
                  {"records", ds.record_count()},
                  {"eligible_points", synth::eligible_points(ds)},
                  {"out", gen_out}},
                 "generated " + std::to_string(ds.patients.size()) + " patients, " +
                     std::to_string(ds.record_count()) + " records -> " + gen_out);
        } else if (lib->parsed()) {
            auto library = synth::build_libraries(import_dataset(lib_src));
            write_text(lib_out, library.to_json().dump(2) + "\n");
            emit(common, {{"out", lib_out}}, "library -> " + lib_out);
        } else if (inj->parsed()) {
            synth::InjectionPlan plan;
            plan.rate = inj_rate;
            plan.seed = inj_seed;
            if (!inj_weights.empty())
                std::copy(inj_weights.begin(), inj_weights.end(), plan.category_weights.begin());
            auto res = synth::inject_discrepancies(import_dataset(inj_in), common.kb(), plan);
            export_dataset(res.corrupted, inj_out);
            write_text(inj_truth, synth::truth_to_json(res, plan).dump(2) + "\n");
            for (const auto& w : res.warnings)
                std::cerr << "warning: " << w << '\n';
            emit(common,
                 {{"eligible_points", res.eligible_points},
                  {"annotations", res.truth.size()},
                  {"warnings", res.warnings},
                  {"out", inj_out},
                  {"truth", inj_truth}},
                 "injected " + std::to_string(res.truth.size()) + " discrepancies into " +
                     std::to_string(res.eligible_points) + " eligible records");
        } else if (det->parsed()) {
            auto ds = import_dataset(det_in);
            auto kb = common.kb();
            std::unique_ptr<detect::Assistant> assistant;
            if (det_stub)
                assistant = std::make_unique<detect::StubAssistant>();
            else if (!det_assistant.empty())
                assistant = std::make_unique<detect::HttpAssistant>(det_assistant,
                                                                    std::chrono::milliseconds(det_timeout));
            detect::DetectorConfig cfg;
            cfg.max_in_flight = det_inflight;
            auto res = detect::detect_all(ds, kb, assistant.get(), cfg);
            std::ostringstream out;
            for (const auto& f : res.findings)
                out << json(f).dump() << '\n';
            write_text(det_out, out.str());
            json summary{{"findings", res.findings.size()}, {"out", det_out}};
            if (res.assistant_configured) {
                summary["assistant"] = {{"configured", true}, {"degraded", res.degraded}};
                if (res.degraded)
                    summary["assistant"]["reason"] = res.degraded_reason;
            }
            if (res.degraded)
                std::cerr << "warning: assistant unavailable, rule-only results (" << res.degraded_reason << ")\n";
            emit(common, summary, std::to_string(res.findings.size()) + " findings -> " + det_out);
        } else if (ev->parsed()) {
            auto truth_json = read_json_file(ev_truth);
            auto truth = synth::truth_from_json(truth_json);
            auto eligible = truth_json.at("eligible_points").get<std::size_t>();
            auto score = eval::score_findings(read_findings(ev_findings), truth, eligible);
            auto report = eval::to_json(score);
            write_text(ev_report, report.dump(2) + "\n");
            std::ostringstream human;
            human << "recall " << score.metrics.recall.value_or(0) << ", precision "
                  << score.metrics.precision.value_or(0) << ", category accuracy "
                  << score.category_accuracy.value_or(0) << " -> " << ev_report;
            emit(common, report, human.str());
        } else if (ec->parsed()) {
            auto params = ec_params.empty() ? econ::EconParams::load(resource_dir() / "econ_defaults.json")
                                            : econ::EconParams::load(ec_params);
            auto report = econ::total_report(params);
            json j = econ::to_json(report);
            if (!ec_sweep.empty()) {
                std::vector<Decimal> values;
                for (const auto& v : ec_values)
                    values.push_back(Decimal::parse(v));
                json rows = json::array();
                for (const auto& r : econ::sensitivity_sweep(params, ec_sweep, values))
                    rows.push_back({{"value", r.value.to_double()},
                                    {"total_savings", r.total_savings.round(2).to_double()},
                                    {"pct_reduction", r.pct_reduction ? json(*r.pct_reduction) : json(nullptr)}});
                j["sweep"] = {{"field", ec_sweep}, {"rows", rows}};
            }
            if (!ec_out.empty()) {
                if (fs::path(ec_out).extension() == ".csv") {
                    std::ostringstream out;
                    econ::write_csv(out, report);
                    write_text(ec_out, out.str());
                } else {
                    write_text(ec_out, j.dump(2) + "\n");
                }
            }
            std::ostringstream human;
            econ::write_csv(human, report);
            emit(common, j, human.str());
        } else if (srv->parsed()) {
            auto cfg = srv_config.empty() ? service::ServiceConfig{} : service::ServiceConfig::load(srv_config);
            cfg.apply_env();
            if (!srv_data.empty())
                cfg.data_dir = srv_data;
            if (!srv_host.empty())
                cfg.host = srv_host;
            if (srv_port >= 0)
                cfg.port = srv_port;
            std::cerr << "listening on " << cfg.host << ":" << cfg.port << '\n';
            service::serve(cfg);
        } else if (dump->parsed()) {
            auto ds = import_dataset(dump_in);
            std::ostringstream out;
            for (const auto& line : context::dump_patient(ds, common.kb(), dump_patient))
                out << line.dump() << '\n';
            if (dump_out.empty())
                std::cout << out.str();
            else
                write_text(dump_out, out.str());
        } else if (dict->parsed()) {
            auto text = data_dictionary().dump(2) + "\n";
            if (dict_out.empty())
                std::cout << text;
            else
                write_text(dict_out, text);
        }
    } catch (const std::exception& e) {
        if (common.json_out)
            std::cout << json{{"error", e.what()}}.dump() << '\n';
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
