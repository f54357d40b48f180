#include <httplib.h>

#include "shopbench/gateway.hpp"

namespace shopbench {

struct GatewayServer::Impl {
  SessionService& service;
  httplib::Server server;

  explicit Impl(SessionService& s) : service(s) {}

  static void send(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  template <typename F>
  static httplib::Server::Handler handle(F&& f) {
    return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
      try {
        send(res, 200, f(req));
      } catch (const SessionError& e) {
        send(res, e.status(), e.body());
      } catch (const std::exception& e) {
        send(res, 500, {{"code", "internal"}, {"message", e.what()}});
      }
    };
  }

  static json parse_body(const httplib::Request& req) {
    try {
      return json::parse(req.body);
    } catch (const json::parse_error& e) {
      throw SessionError(400, "malformed_body", std::string("body is not JSON: ") + e.what());
    }
  }

  void routes() {
    server.Post("/sessions", handle([this](const httplib::Request& req) { return service.create(parse_body(req)); }));
    server.Post(R"(/sessions/([^/]+)/agent-turn)", handle([this](const httplib::Request& req) {
                  return service.agent_turn(req.matches[1], parse_body(req));
                }));
    server.Get(R"(/sessions/([^/]+)/state)",
               handle([this](const httplib::Request& req) { return service.state(req.matches[1]); }));
    server.Get(R"(/sessions/([^/]+)/result)",
               handle([this](const httplib::Request& req) { return service.result(req.matches[1]); }));
    server.Delete(R"(/sessions/([^/]+))", handle([this](const httplib::Request& req) {
                    const std::string id = req.matches[1];
                    service.remove(id);
                    return json{{"session_id", id}, {"deleted", true}};
                  }));
    server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
      if (!res.body.empty()) return;
      const int status = res.status;
      send(res, status, {{"code", status == 404 ? "not_found" : "error"},
                         {"message", "no route for " + req.method + " " + req.path}});
    });
  }
};

GatewayServer::GatewayServer(SessionService& service) : impl_(std::make_unique<Impl>(service)) { impl_->routes(); }

GatewayServer::~GatewayServer() { stop(); }

int GatewayServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool GatewayServer::listen() { return impl_->server.listen_after_bind(); }

void GatewayServer::stop() { impl_->server.stop(); }

void GatewayServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace shopbench
