#include "igrec/service/http.hpp"

#include <httplib.h>

namespace igrec::service {
namespace {

constexpr const char* kJson = "application/json";

void reply(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void reply_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  reply(res, status, {{"code", code}, {"message", message}});
}

nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::exception& e) {
    throw ServiceError(400, "bad_request", std::string("body is not valid JSON: ") + e.what());
  }
}

std::size_t query_size(const httplib::Request& req, const char* name, std::size_t fallback) {
  if (!req.has_param(name)) return fallback;
  const auto text = req.get_param_value(name);
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used != text.size() || v < 0) throw std::invalid_argument(text);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ServiceError(400, "bad_request", std::string("query parameter '") + name + "' must be a non-negative integer");
  }
}

template <typename Fn>
httplib::Server::Handler guarded(SessionManager& sessions, int ok_status, Fn fn) {
  return [&sessions, ok_status, fn](const httplib::Request& req, httplib::Response& res) {
    try {
      sessions.evict_expired();
      reply(res, ok_status, fn(req));
    } catch (const ServiceError& e) {
      reply_error(res, e.status(), e.code(), e.what());
    } catch (const ContractError& e) {
      reply_error(res, 400, "bad_request", e.what());
    } catch (const std::exception& e) {
      reply_error(res, 500, "internal", e.what());
    }
  };
}

}  // namespace

struct HttpService::Impl {
  httplib::Server server;
};

HttpService::HttpService(SessionManager& sessions) : impl_(std::make_unique<Impl>()) {
  auto& s = impl_->server;
  s.Post("/sessions", guarded(sessions, 201, [&sessions](const httplib::Request& req) {
           return sessions.start_session(parse_body(req));
         }));
  s.Post("/sessions/:id/feedback", guarded(sessions, 200, [&sessions](const httplib::Request& req) {
           return sessions.post_feedback(req.path_params.at("id"), parse_body(req));
         }));
  s.Get("/sessions/:id", guarded(sessions, 200, [&sessions](const httplib::Request& req) {
          return sessions.get_session(req.path_params.at("id"));
        }));
  s.Get("/catalog/tops", guarded(sessions, 200, [&sessions](const httplib::Request& req) {
          return sessions.catalog_tops(query_size(req, "offset", 0), query_size(req, "limit", 50));
        }));
  s.Get("/healthz", guarded(sessions, 200, [&sessions](const httplib::Request&) { return sessions.health(); }));
  s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (res.status == 404 && res.body.empty()) reply_error(res, 404, "not_found", "no route for " + req.method + " " + req.path);
  });
}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpService::run() { impl_->server.listen_after_bind(); }

void HttpService::stop() { impl_->server.stop(); }

}  // namespace igrec::service
