#include "trialqc/detector.hpp"
#include "trialqc/error.hpp"

#include <httplib.h>

namespace trialqc::detect {

using nlohmann::json;

AssistantVerdict parse_verdict(const json& body) {
    AssistantVerdict v;
    try {
        v.agree = body.at("agree").get<bool>();
        v.confidence = body.at("confidence").get<double>();
        v.rationale = body.value("rationale", "");
        if (body.contains("category") && !body["category"].is_null())
            v.category = body["category"].get<int>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("assistant response: ") + e.what());
    }
    if (v.confidence < 0 || v.confidence > 1)
        throw ValidationError("assistant response: confidence out of range 0–1");
    if (v.agree && (!v.category || *v.category < 1 || *v.category > 6))
        throw ValidationError("assistant response: agreeing verdict needs a category in 1–6");
    return v;
}

HttpAssistant::HttpAssistant(std::string endpoint, std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), timeout_(timeout) {
    if (timeout_.count() <= 0)
        throw ValidationError("assistant timeout must be positive");
    while (!endpoint_.empty() && endpoint_.back() == '/')
        endpoint_.pop_back();
}

AssistantVerdict HttpAssistant::adjudicate(const json& request) {
    httplib::Client client(endpoint_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    auto res = client.Post("/adjudicate", request.dump(), "application/json");
    if (!res)
        throw IoError("assistant unreachable at " + endpoint_ + ": " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw IoError("assistant returned HTTP " + std::to_string(res->status));
    json body;
    try {
        body = json::parse(res->body);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("assistant response is not JSON: ") + e.what());
    }
    return parse_verdict(body);
}

AssistantVerdict StubAssistant::adjudicate(const json& request) {
    const auto& f = request.at("finding");
    AssistantVerdict v;
    if (f.at("category").is_null()) {
        v.agree = false;
        v.confidence = 0.5;
        v.rationale = "insufficient reference data to adjudicate";
        return v;
    }
    v.agree = true;
    v.category = f["category"].get<int>();
    v.confidence = std::min(1.0, f.value("confidence", 0.0) + 0.05);
    v.rationale = "evidence consistent with rule finding";
    return v;
}

} // namespace trialqc::detect
