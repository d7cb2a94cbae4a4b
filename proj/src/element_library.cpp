#include "trialqc/error.hpp"
#include "trialqc/synth.hpp"

#include <fstream>

namespace trialqc::synth {

using nlohmann::json;

namespace {
constexpr LibraryDomain kLibraryDomains[] = {LibraryDomain::adverse_events, LibraryDomain::conmeds,
                                             LibraryDomain::procedures, LibraryDomain::medical_history};
}

std::string_view to_string(LibraryDomain d) {
    switch (d) {
    case LibraryDomain::adverse_events: return "adverse_events";
    case LibraryDomain::conmeds: return "concomitant_medications";
    case LibraryDomain::procedures: return "procedures";
    case LibraryDomain::medical_history: return "medical_history";
    }
    return "";
}

void ElementLibrary::validate() const {
    for (auto d : kLibraryDomains) {
        auto it = domains.find(d);
        if (it == domains.end() || it->second.empty())
            throw ValidationError("element library: domain " + std::string(to_string(d)) + " is empty");
        for (const auto& e : it->second)
            if (!(e.weight > 0))
                throw ValidationError("element library: non-positive weight for '" + e.element + "' in " +
                                      std::string(to_string(d)));
    }
}

const std::vector<WeightedElement>& ElementLibrary::at(LibraryDomain d) const {
    auto it = domains.find(d);
    if (it == domains.end())
        throw ValidationError("element library: domain " + std::string(to_string(d)) + " is empty");
    return it->second;
}

json ElementLibrary::to_json() const {
    json j = json::object();
    for (const auto& [d, elems] : domains) {
        json arr = json::array();
        for (const auto& e : elems)
            arr.push_back({{"element", e.element}, {"weight", e.weight}});
        j[std::string(to_string(d))] = std::move(arr);
    }
    return j;
}

ElementLibrary ElementLibrary::from_json(const json& j) {
    ElementLibrary lib;
    try {
        for (auto d : kLibraryDomains) {
            auto key = std::string(to_string(d));
            if (!j.contains(key))
                continue;
            auto& out = lib.domains[d];
            for (const auto& e : j.at(key))
                out.push_back({e.at("element").get<std::string>(), e.at("weight").get<double>()});
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("element library: ") + e.what());
    }
    lib.validate();
    return lib;
}

ElementLibrary ElementLibrary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path.string());
    try {
        return from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ValidationError(path.filename().string() + ": " + e.what());
    }
}

ElementLibrary build_libraries(const StudyDataset& source) {
    std::map<LibraryDomain, std::map<std::string, double>> counts;
    for (const auto& r : source.adverse_events)
        counts[LibraryDomain::adverse_events][r.term] += 1;
    for (const auto& r : source.conmeds)
        counts[LibraryDomain::conmeds][r.drug_name] += 1;
    for (const auto& r : source.procedures)
        counts[LibraryDomain::procedures][r.name] += 1;
    for (const auto& r : source.medical_history)
        counts[LibraryDomain::medical_history][r.condition] += 1;

    ElementLibrary lib;
    for (auto d : kLibraryDomains) {
        auto& out = lib.domains[d];
        for (const auto& [element, n] : counts[d])
            out.push_back({element, n});
    }
    lib.validate();
    return lib;
}

WeightedSampler::WeightedSampler(std::vector<double> weights) : weights_(std::move(weights)) {
    if (weights_.empty())
        throw ValidationError("weighted sampler needs at least one weight");
    for (double w : weights_)
        if (!(w > 0))
            throw ValidationError("weighted sampler weights must be positive");
}

std::size_t WeightedSampler::sample(Rng& rng) const { return rng.weighted(weights_); }

} // namespace trialqc::synth
