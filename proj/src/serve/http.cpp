// Eigen before httplib: <resolv.h> defines a `_res` macro that breaks Eigen.
#include "aed/serve/service.hpp"

#include <httplib.h>

namespace aed {
namespace {

using nlohmann::json;

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void error(httplib::Response& res, int status, const std::string& kind, const std::string& msg,
           const std::string& field = "") {
  json b = {{"error", kind}, {"message", msg}};
  if (!field.empty()) b["field"] = field;
  reply(res, status, b);
}

template <class F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const SchemaError& e) {
    error(res, 400, "schema", e.what(), e.field());
  } catch (const NotFoundError& e) {
    error(res, 404, "not_found", e.what());
  } catch (const ConflictError& e) {
    error(res, 409, "conflict", e.what());
  } catch (const json::exception& e) {
    error(res, 400, "schema", e.what());
  } catch (const std::exception& e) {
    error(res, 500, "internal", e.what());
  }
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw SchemaError("$", std::string("body is not valid JSON: ") + e.what());
  }
}

}  // namespace

void mount_routes(httplib::Server& server, SessionService& service) {
  server.Get("/healthz", [&service](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, {{"status", "ok"}, {"checkpoints", service.model_ids()}, {"sessions", service.session_count()}});
  });

  server.Post("/sessions", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      service.expire();
      const json body = parse_body(req);
      if (!body.is_object()) throw SchemaError("$", "expected a JSON object");
      if (!body.contains("study") || !body["study"].is_number_integer()) {
        throw SchemaError("study", "expected 1, 2 or 3");
      }
      if (!body.contains("checkpoint") || !body["checkpoint"].is_string()) {
        throw SchemaError("checkpoint", "expected a checkpoint id");
      }
      reply(res, 201, service.create_session(body["study"].get<int>(), body["checkpoint"].get<std::string>()));
    });
  });

  server.Post(R"(/sessions/([^/]+)/outcomes)", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, service.submit_outcome(req.matches[1], parse_body(req))); });
  });

  server.Get(R"(/sessions/([^/]+)/estimate)", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, service.get_estimate(req.matches[1])); });
  });
}

}  // namespace aed
