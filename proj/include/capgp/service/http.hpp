#pragma once

#include <string>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "capgp/error.hpp"
#include "capgp/service/auth_service.hpp"

namespace capgp::service {

/// HTTP status for each failure code surfaced by the service.
inline int http_status(Errc code) {
  switch (code) {
    case Errc::UnknownUser:
    case Errc::UnknownChallenge:
    case Errc::UnknownImageId: return 404;
    case Errc::UserExists:
    case Errc::ChallengeConsumed: return 409;
    case Errc::ChallengeExpired: return 410;
    case Errc::AttemptsExhausted: return 423;
    case Errc::RateLimited: return 429;
    case Errc::Unauthorized: return 401;
    case Errc::IoError:
    case Errc::StoreCorrupt: return 500;
    default: return 400;
  }
}

/// JSON/PNG endpoints over an AuthService. Responses carry only the
/// documented fields; reject reasons and plaintext strings never leave the
/// process.
class HttpFrontend {
 public:
  explicit HttpFrontend(AuthService& service) : service_(service) {
    // SO_REUSEADDR only: the library default adds SO_REUSEPORT, which lets a
    // second server bind a port that is already serving.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    routes();
  }

  httplib::Server& server() { return server_; }

  /// Binds without serving; returns false when the address is unavailable.
  bool bind(const std::string& host, int port) {
    if (port == 0) {
      port_ = server_.bind_to_any_port(host);
      return port_ > 0;
    }
    if (!server_.bind_to_port(host, port)) return false;
    port_ = port;
    return true;
  }

  int port() const { return port_; }

  /// Blocks until stop() is called.
  bool serve() { return server_.listen_after_bind(); }

  void stop() { server_.stop(); }

  void wait_until_ready() { server_.wait_until_ready(); }

 private:
  static void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, Errc code) {
    send_json(res, http_status(code), json{{"error", std::string(to_string(code))}});
  }

  template <typename Handler>
  static httplib::Server::Handler guarded(Handler handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const Error& e) {
        send_error(res, e.code());
      } catch (const json::exception&) {
        send_json(res, 400, json{{"error", "BadRequest"}});
      }
    };
  }

  void routes() {
    if (!service_.config().static_dir.empty()) server_.set_mount_point("/", service_.config().static_dir);

    server_.Post("/api/register", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = json::parse(req.body);
      const auto user_id = body.at("user_id").get<std::string>();
      service_.register_user(user_id, body.at("pass_images").get<std::vector<ImageId>>(),
                             body.at("positions").get<std::vector<std::vector<int>>>());
      send_json(res, 200, json{{"status", "registered"}, {"user_id", user_id}});
    }));

    server_.Get("/api/challenge", guarded([this](const httplib::Request& req, httplib::Response& res) {
      if (!req.has_param("user")) throw Error(Errc::InvalidParams, "missing user");
      send_json(res, 200, json(service_.issue_challenge(req.get_param_value("user"))));
    }));

    server_.Post("/api/submit", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = json::parse(req.body);
      std::vector<std::int64_t> keys;
      if (body.contains("keystrokes_ms")) keys = body.at("keystrokes_ms").get<std::vector<std::int64_t>>();
      const auto r = service_.submit(body.at("user_id").get<std::string>(), body.at("challenge_id").get<std::string>(),
                                     body.at("typed").get<std::string>(), std::move(keys));
      json out = {{"result", r.accepted ? "accept" : "reject"}, {"attempts_left", r.attempts_left}};
      if (r.rounds_remaining > 0) out["rounds_remaining"] = r.rounds_remaining;
      send_json(res, 200, out);
    }));

    server_.Get(R"(/captcha/([0-9a-f]+)/(\d+)\.png)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto png = service_.captcha_png(req.matches[1], std::stoul(req.matches[2]));
                  res.set_header("Cache-Control", "no-store");
                  res.set_content(std::string(png.begin(), png.end()), "image/png");
                }));

    server_.Get(R"(/image/([A-Za-z0-9_.\-]+)\.png)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto png = service_.image_png(req.matches[1]);
                  res.set_content(std::string(png.begin(), png.end()), "image/png");
                }));

    server_.Get("/api/attempts", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::string token = req.get_header_value("X-Admin-Token");
      std::optional<std::string> user;
      if (req.has_param("user")) user = req.get_param_value("user");
      send_json(res, 200, service_.export_attempts(token, user));
    }));
  }

  AuthService& service_;
  httplib::Server server_;
  int port_ = 0;
};

}  // namespace capgp::service
