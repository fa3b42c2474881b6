#include "lsti/service.hpp"

#include <functional>

#include "httplib.h"
#include "lsti/error.hpp"
#include "lsti/json_io.hpp"

namespace lsti {

namespace {

nlohmann::json error_body(const std::string& kind, const std::string& message,
                          const std::string& rule = {}) {
  nlohmann::json e{{"kind", kind}, {"message", message}};
  if (!rule.empty()) e["rule"] = rule;
  return {{"v", kSchemaVersion}, {"error", e}};
}

void reply(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

using Handler = std::function<nlohmann::json(const httplib::Request&)>;

httplib::Server::Handler guarded(Handler h, int ok_status = 200) {
  return [h = std::move(h), ok_status](const httplib::Request& req, httplib::Response& res) {
    try {
      reply(res, ok_status, h(req));
    } catch (const ValidationError& e) {
      reply(res, 422, error_body("validation", e.what(), e.rule()));
    } catch (const NotFoundError& e) {
      reply(res, 404, error_body("not-found", e.what()));
    } catch (const FormatError& e) {
      reply(res, 400, error_body("request", e.what()));
    } catch (const nlohmann::json::exception& e) {
      reply(res, 400, error_body("request", e.what()));
    } catch (const std::exception& e) {
      reply(res, 500, error_body("internal", e.what()));
    }
  };
}

nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed JSON body: ") + e.what());
  }
}

}  // namespace

struct HttpService::Impl {
  explicit Impl(SessionStore& s) : store(s) {}
  SessionStore& store;
  httplib::Server server;
};

HttpService::HttpService(SessionStore& store) : impl_(std::make_unique<Impl>(store)) {
  auto& s = impl_->server;
  auto& st = impl_->store;
  const std::string id = R"(/sessions/([A-Za-z0-9_-]{1,64}))";

  s.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                         {"Access-Control-Allow-Headers", "Content-Type"},
                         {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  s.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  s.Get("/config", guarded([&st](const httplib::Request&) {
          nlohmann::json c;
          to_json(c, st.config());
          return nlohmann::json{{"v", kSchemaVersion},
                                {"fingerprint", st.config().fingerprint()},
                                {"config", c}};
        }));
  s.Post("/sessions", guarded([&st](const httplib::Request& req) { return st.create(parse_body(req)); },
                              201));
  s.Get(id + "/state", guarded([&st](const httplib::Request& req) { return st.state(req.matches[1]); }));
  s.Post(id + "/actions", guarded([&st](const httplib::Request& req) {
           return st.post_action(req.matches[1], parse_body(req));
         }));
  s.Get(id + "/predictions",
        guarded([&st](const httplib::Request& req) { return st.predictions(req.matches[1]); }));
  s.Get(id + "/conflicts",
        guarded([&st](const httplib::Request& req) { return st.conflicts(req.matches[1]); }));
  s.Post(id + "/resume",
         guarded([&st](const httplib::Request& req) { return st.resume(req.matches[1]); }));
  s.Get(id + "/export", guarded([&st](const httplib::Request& req) {
          nlohmann::json log;
          to_json(log, st.export_log(req.matches[1]));
          return nlohmann::json{{"v", kSchemaVersion}, {"log", log}};
        }));
  s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (res.body.empty()) {
      const auto kind = res.status == 404 ? "not-found" : "request";
      reply(res, res.status, error_body(kind, "no route for " + req.method + " " + req.path));
    }
  });
}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
  auto& s = impl_->server;
  if (port == 0) {
    const int p = s.bind_to_any_port(host);
    if (p < 0) throw Error("cannot bind " + host);
    return p;
  }
  if (!s.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpService::listen() { impl_->server.listen_after_bind(); }

void HttpService::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace lsti
