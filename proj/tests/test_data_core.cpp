#include "fixtures.hpp"

#include "trialqc/audit.hpp"
#include "trialqc/csv.hpp"
#include "trialqc/dataset_io.hpp"
#include "trialqc/error.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

namespace trialqc::test {
namespace {

using nlohmann::json;

const char* kDemographics = "patient_id,age,sex,enrollment_day\nP001,61,F,1\nP002,47,M,1\n";
const char* kAdverseEvents =
    "ae_id,patient_id,term,narrative,grade,start_day,end_day,causality,action_taken,serious\n"
    "AE001,P001,nausea,\"mild nausea, resolved\",1,5,9,related,none,false\n"
    "AE002,P002,anemia,\"moderate anemia\",2,10,,possibly_related,none,false\n";
const char* kConmeds = "cm_id,patient_id,drug_name,indication_text,linked_ae_id,start_day,end_day,dose_text\n"
                       "CM001,P001,ondansetron,nausea,AE001,5,8,8 mg\n";
const char* kLabs = "lab_id,patient_id,analyte,value,units,collection_day,normal_low,normal_high\n"
                    "LB001,P002,hemoglobin,9.4,g/dL,11,12,16\n";
const char* kVitals = "vs_id,patient_id,day,weight_kg,systolic_bp,diastolic_bp\nVS001,P001,1,70.5,120,80\n";
const char* kExposure = "ex_id,patient_id,dose_mg,start_day,end_day\nEX001,P001,100,1,21\nEX002,P002,100,1,21\n";
const char* kHistory = "mh_id,patient_id,condition,pre_study\nMH001,P002,hypertension,true\n";
const char* kProcedures = "pr_id,patient_id,name,day\nPR001,P001,chest x-ray,3\n";

void write_fixture(const fs::path& dir) {
    write_file(dir / "demographics.csv", kDemographics);
    write_file(dir / "adverse_events.csv", kAdverseEvents);
    write_file(dir / "concomitant_medications.csv", kConmeds);
    write_file(dir / "labs.csv", kLabs);
    write_file(dir / "vitals.csv", kVitals);
    write_file(dir / "exposure.csv", kExposure);
    write_file(dir / "medical_history.csv", kHistory);
    write_file(dir / "procedures.csv", kProcedures);
}

TEST(Csv, QuotedFieldsWithCommasQuotesAndNewlines) {
    std::istringstream in("a,b\n\"x, y\",\"say \"\"hi\"\"\"\n\"line1\nline2\",z\n");
    auto t = csv::read(in, "t.csv");
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[0][0], "x, y");
    EXPECT_EQ(t.rows[0][1], "say \"hi\"");
    EXPECT_EQ(t.rows[1][0], "line1\nline2");

    std::ostringstream out;
    csv::write_row(out, t.rows[0]);
    std::istringstream back("a,b\n" + out.str());
    EXPECT_EQ(csv::read(back, "t.csv").rows[0], t.rows[0]);
}

TEST(Csv, NumberFormatRoundTrips) {
    for (double v : {0.1, 7.5, 1e-7, 123456.789, 2.0 / 3.0})
        EXPECT_EQ(std::stod(csv::format_number(v)), v);
    EXPECT_EQ(csv::format_number(100), "100");
}

TEST(DatasetImport, WellFormedFilesWithTwoPatients) {
    TempDir dir;
    write_fixture(dir.path());
    auto ds = import_dataset(dir.path());
    EXPECT_EQ(ds.patients.size(), 2u);
    EXPECT_EQ(ds.record_count(), 11u);
    EXPECT_EQ(ds.provenance.size(), ds.record_count());
    EXPECT_EQ(ds.provenance.at("AE002"), (Provenance{"adverse_events.csv", 2}));
    EXPECT_EQ(ds.adverse_events[0].narrative, "mild nausea, resolved");
    EXPECT_FALSE(ds.adverse_events[1].end_day.has_value());
    EXPECT_EQ(ds.conmeds[0].linked_ae_id, "AE001");
}

TEST(DatasetImport, GradeOutOfRangeIsRejected) {
    TempDir dir;
    write_fixture(dir.path());
    write_file(dir / "adverse_events.csv",
               "ae_id,patient_id,term,narrative,grade,start_day,end_day,causality,action_taken,serious\n"
               "AE001,P001,nausea,x,7,5,9,related,none,false\n");
    try {
        import_dataset(dir.path());
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("grade out of range 1–5"), std::string::npos) << e.what();
    }
}

TEST(DatasetImport, DanglingLinkedAeNamesTheConmed) {
    StudyDataset ds;
    ds.patients.push_back(patient());
    ds.adverse_events.push_back(adverse_event("AE001", "nausea", 1, 5, 9));
    ds.conmeds.push_back(conmed("CM009", "ondansetron", "AE404", 5, 8));
    try {
        validate(ds);
        FAIL() << "expected IntegrityError";
    } catch (const IntegrityError& e) {
        ASSERT_EQ(e.offenders().size(), 1u);
        EXPECT_EQ(e.offenders()[0], "CM009");
    }
}

TEST(DatasetImport, MissingFileAndMissingColumn) {
    TempDir dir;
    write_fixture(dir.path());
    fs::remove(dir / "labs.csv");
    EXPECT_THROW(import_dataset(dir.path()), IoError);
    write_file(dir / "labs.csv", "lab_id,patient_id\n");
    EXPECT_THROW(import_dataset(dir.path()), ValidationError);
}

TEST(DatasetImport, BadEnumerationIsRejected) {
    TempDir dir;
    write_fixture(dir.path());
    write_file(dir / "demographics.csv", "patient_id,age,sex,enrollment_day\nP001,61,unknown,1\nP002,47,M,1\n");
    EXPECT_THROW(import_dataset(dir.path()), ValidationError);
}

TEST(Validate, OverlappingExposureAndDuplicateIds) {
    auto ds = single_patient();
    ds.exposures.push_back(exposure("EX002", 50, 80, 90));
    EXPECT_THROW(validate(ds), ValidationError);
    ds.exposures.pop_back();
    ds.adverse_events.push_back(adverse_event("EX001", "nausea", 1, 5, 9));
    EXPECT_THROW(validate(ds), ValidationError);
}

TEST(DatasetExport, RoundTripOfImportedFixture) {
    TempDir in;
    write_fixture(in.path());
    auto ds = import_dataset(in.path());
    for (auto fmt : {ExportFormat::csv, ExportFormat::ndjson}) {
        TempDir dir;
        export_dataset(ds, dir.path(), fmt);
        EXPECT_TRUE(same_records(import_dataset(dir.path()), ds));
    }
}

TEST(DatasetExport, EmptyDatasetGivesEightHeaderOnlyFiles) {
    TempDir dir;
    export_dataset(StudyDataset{}, dir.path());
    int files = 0;
    for (auto d : kAllDomains) {
        auto text = read_file(dir / file_name(d));
        EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1) << file_name(d);
        ++files;
    }
    EXPECT_EQ(files, 8);
    EXPECT_TRUE(import_dataset(dir.path()).patients.empty());
}

TEST(DatasetExport, GeneratedCorpusRoundTrips) {
    auto ds = synth::generate_patients(shipped_library(), shipped_kb(), 50, 7);
    for (auto fmt : {ExportFormat::csv, ExportFormat::ndjson}) {
        TempDir dir;
        export_dataset(ds, dir.path(), fmt);
        auto back = import_dataset(dir.path());
        EXPECT_TRUE(same_records(back, ds));
        sort_canonical(back);
        TempDir again;
        export_dataset(back, again.path(), fmt);
        for (auto d : kAllDomains) {
            auto ext = fmt == ExportFormat::csv ? "csv" : "ndjson";
            EXPECT_EQ(read_file(dir / file_name(d, ext)), read_file(again / file_name(d, ext)));
        }
    }
}

TEST(DataDictionary, MatchesShippedFile) {
    auto shipped = json::parse(read_file(data_dir() / "data_dictionary.json"));
    EXPECT_EQ(data_dictionary(), shipped);
    EXPECT_EQ(shipped["domains"].size(), 8u);
}

TEST(Audit, AppendToEmptyLog) {
    AuditLog log;
    log.append(1000, "alice", AuditAction::query_created, "Q-1", json{{"x", 1}});
    EXPECT_EQ(log.size(), 1u);
    EXPECT_EQ(log.entries()[0].payload_digest, sha256_hex(json{{"x", 1}}.dump()));
}

TEST(Audit, DecreasingTimestampForSameSubjectIsRejected) {
    AuditLog log;
    log.append(2000, "alice", AuditAction::query_created, "Q-1", json::object());
    EXPECT_THROW(log.append(1999, "alice", AuditAction::query_approved, "Q-1", json::object()), ConflictError);
    EXPECT_NO_THROW(log.append(1500, "bob", AuditAction::query_created, "Q-2", json::object()));
    EXPECT_EQ(log.size(), 2u);
}

TEST(Audit, Sha256KnownVector) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Audit, ThousandEntriesReplayDeterministically) {
    auto build = [] {
        AuditLog log;
        for (int i = 0; i < 1000; ++i)
            log.append(i * 10, "r" + std::to_string(i % 3), AuditAction::decision_recorded,
                       "S" + std::to_string(i % 7), json{{"i", i}});
        return log;
    };
    auto a = build(), b = build();
    EXPECT_EQ(a.digest(), b.digest());

    TempDir dir;
    a.save(dir / "audit.ndjson");
    auto loaded = AuditLog::load(dir / "audit.ndjson");
    EXPECT_EQ(loaded.entries(), a.entries());
    EXPECT_EQ(loaded.digest(), a.digest());

    AuditLog c = build();
    c.append(99999, "x", AuditAction::session_ended, "S0", json::object());
    EXPECT_NE(c.digest(), a.digest());
}

} // namespace
} // namespace trialqc::test
