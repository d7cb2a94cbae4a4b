#pragma once

#include "trialqc/dataset_io.hpp"
#include "trialqc/error.hpp"

#include <nlohmann/json.hpp>

namespace trialqc::detail {

template <class T, class Id>
bool patch_in(std::vector<T>& records, const std::string& id, const nlohmann::json& set, Id id_of) {
    for (auto& r : records) {
        if (id_of(r) != id)
            continue;
        nlohmann::json j = r;
        for (const auto& [k, v] : set.items()) {
            if (!j.contains(k))
                throw ValidationError("record " + id + " has no field '" + k + "'");
            j[k] = v;
        }
        T updated = j.template get<T>();
        if (id_of(updated) != id)
            throw ValidationError("record ids cannot be changed (" + id + ")");
        r = std::move(updated);
        return true;
    }
    return false;
}

/// Overwrites fields of the record with id `id` in whichever domain holds it.
inline bool patch_record(StudyDataset& ds, const std::string& id, const nlohmann::json& set) {
    return patch_in(ds.patients, id, set, [](const auto& r) { return r.patient_id; }) ||
           patch_in(ds.adverse_events, id, set, [](const auto& r) { return r.ae_id; }) ||
           patch_in(ds.conmeds, id, set, [](const auto& r) { return r.cm_id; }) ||
           patch_in(ds.labs, id, set, [](const auto& r) { return r.lab_id; }) ||
           patch_in(ds.vitals, id, set, [](const auto& r) { return r.vs_id; }) ||
           patch_in(ds.exposures, id, set, [](const auto& r) { return r.ex_id; }) ||
           patch_in(ds.medical_history, id, set, [](const auto& r) { return r.mh_id; }) ||
           patch_in(ds.procedures, id, set, [](const auto& r) { return r.pr_id; });
}

} // namespace trialqc::detail
