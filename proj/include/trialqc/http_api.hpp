#pragma once

#include "trialqc/service.hpp"

namespace httplib {
class Server;
}

namespace trialqc::service {

/// Mounts every endpoint on `server`. Errors map to 400 (validation), 404, 409
/// (conflict, body names the current state) and 500, with body {"error": {...}}.
void register_routes(httplib::Server& server, ReviewService& svc);

/// Binds and blocks until the server stops. Throws IoError when the port is busy.
void serve(const ServiceConfig& cfg);

} // namespace trialqc::service
