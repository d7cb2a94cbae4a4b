#include "trialqc/error.hpp"
#include "trialqc/http_api.hpp"

#include <httplib.h>

#include <csignal>
#include <functional>

namespace trialqc::service {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(2), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view type, const std::string& message,
                json extra = json::object()) {
    json err{{"type", type}, {"message", message}};
    err.update(extra);
    send_json(res, {{"error", err}}, status);
}

json body_of(const httplib::Request& req) {
    if (req.body.empty())
        return json::object();
    try {
        auto j = json::parse(req.body);
        if (!j.is_object())
            throw ValidationError("request body must be a JSON object");
        return j;
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("request body is not JSON: ") + e.what());
    }
}

std::string str(const json& body, const char* key, bool required = true) {
    if (!body.contains(key) || body[key].is_null()) {
        if (required)
            throw ValidationError(std::string("missing field '") + key + "'");
        return {};
    }
    if (!body[key].is_string())
        throw ValidationError(std::string("field '") + key + "' must be a string");
    return body[key].get<std::string>();
}

using Handler = std::function<json(const httplib::Request&)>;

/// Wraps a handler with the error-to-status mapping. `on_conflict` adds context
/// (such as the current query state) to 409 bodies.
httplib::Server::Handler wrap(Handler h, int ok_status = 200,
                              std::function<json(const httplib::Request&)> on_conflict = nullptr) {
    return [h = std::move(h), ok_status, on_conflict = std::move(on_conflict)](const httplib::Request& req,
                                                                                 httplib::Response& res) {
        try {
            send_json(res, h(req), ok_status);
        } catch (const NotFoundError& e) {
            send_error(res, 404, "not_found", e.what());
        } catch (const ConflictError& e) {
            json extra = json::object();
            if (on_conflict) {
                try {
                    extra = on_conflict(req);
                } catch (const std::exception&) {
                }
            }
            send_error(res, 409, "conflict", e.what(), extra);
        } catch (const IntegrityError& e) {
            send_error(res, 400, "integrity", e.what(), {{"offenders", e.offenders()}});
        } catch (const ValidationError& e) {
            send_error(res, 400, "validation", e.what());
        } catch (const IoError& e) {
            send_error(res, 500, "io", e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "internal", e.what());
        }
    };
}

} // namespace

void register_routes(httplib::Server& server, ReviewService& svc) {
    server.Get("/datasets", wrap([&](const auto&) { return svc.list_datasets(); }));
    server.Post("/datasets/import", wrap([&](const auto& req) {
                    auto body = body_of(req);
                    std::optional<std::filesystem::path> truth;
                    if (auto t = str(body, "truth", false); !t.empty())
                        truth = t;
                    return svc.import_dataset(str(body, "path"), str(body, "reviewer_id"), truth,
                                              str(body, "name", false));
                }));
    server.Get(R"(/patients/([^/]+)/profile)",
               wrap([&](const auto& req) { return svc.patient_profile(req.matches[1]); }));
    server.Get("/findings", wrap([&](const auto& req) {
                   auto sort = req.has_param("sort") ? req.get_param_value("sort") : std::string("priority");
                   if (sort != "priority" && sort != "id")
                       throw ValidationError("sort must be priority or id");
                   return svc.findings(sort == "priority");
               }));
    server.Get(R"(/findings/([^/]+))", wrap([&](const auto& req) { return svc.finding(req.matches[1]); }));

    server.Get("/queries", wrap([&](const auto&) { return svc.list_queries(); }));
    server.Get(R"(/queries/([^/]+))", wrap([&](const auto& req) { return svc.get_query(req.matches[1]); }));
    server.Post("/queries", wrap(
                                [&](const auto& req) {
                                    auto body = body_of(req);
                                    return svc.create_query(str(body, "finding_id"), str(body, "reviewer_id"));
                                },
                                201));
    auto transition = wrap(
        [&](const auto& req) {
            auto body = body_of(req);
            std::optional<std::string> text;
            if (body.contains("text"))
                text = str(body, "text");
            return svc.transition_query(req.matches[1], str(body, "action"), str(body, "reviewer_id"), text);
        },
        200,
        [&](const auto& req) {
            auto q = svc.get_query(req.matches[1]);
            return json{{"state", q["state"]}, {"action", body_of(req).value("action", "")}};
        });
    server.Post(R"(/queries/([^/]+)/transition)", transition);
    server.Post(R"(/queries/([^/]+)/decision)", transition);

    server.Post("/sessions", wrap(
                                 [&](const auto& req) {
                                     auto body = body_of(req);
                                     return svc.create_session(str(body, "reviewer_id"), str(body, "condition"));
                                 },
                                 201));
    server.Get(R"(/sessions/([^/]+))", wrap([&](const auto& req) { return svc.get_session(req.matches[1]); }));
    server.Post(R"(/sessions/([^/]+)/decisions)", wrap([&](const auto& req) {
                    auto body = body_of(req);
                    return svc.record_decision(req.matches[1], str(body, "finding_id"), str(body, "verdict"),
                                               str(body, "reviewer_id"));
                }));
    server.Post(R"(/sessions/([^/]+)/end)", wrap([&](const auto& req) {
                    auto body = body_of(req);
                    return svc.end_session(req.matches[1], str(body, "reviewer_id"));
                }));

    server.Get("/reports/eval", wrap([&](const auto&) { return svc.eval_report(); }));
    server.Get("/reports/econ", wrap([&](const auto&) { return svc.econ_report(); }));
    server.Get("/audit", wrap([&](const auto&) { return svc.audit_entries(); }));
}

namespace {

httplib::Server* g_server = nullptr;

void stop_on_signal(int) {
    if (g_server)
        g_server->stop();
}

/// Like httplib's defaults but without SO_REUSEPORT, so a taken port fails to bind.
void exclusive_socket_options(socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
}

} // namespace

void serve(const ServiceConfig& cfg) {
    ReviewService svc(cfg);
    httplib::Server server;
    server.set_socket_options(exclusive_socket_options);
    register_routes(server, svc);
    if (!server.bind_to_port(cfg.host, cfg.port))
        throw IoError("cannot listen on " + cfg.host + ":" + std::to_string(cfg.port) + " (port busy or not permitted)");
    g_server = &server;
    std::signal(SIGINT, stop_on_signal);
    std::signal(SIGTERM, stop_on_signal);
    server.listen_after_bind();
    g_server = nullptr;
    svc.flush();
}

} // namespace trialqc::service
