#include "sentdiag/annotation_server.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "sentdiag/errors.hpp"

namespace sentdiag::annotation {

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(-1, ' ', false, json::error_handler_t::replace), "application/json; charset=utf-8");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message,
                json details = json::object()) {
  send_json(res, status, json{{"code", code}, {"message", message}, {"details", std::move(details)}});
}

std::string bearer(const httplib::Request& req) {
  const auto h = req.get_header_value("Authorization");
  constexpr std::string_view prefix = "Bearer ";
  if (h.size() > prefix.size() && h.compare(0, prefix.size(), prefix) == 0) return h.substr(prefix.size());
  return {};
}

}  // namespace

struct Server::Impl {
  TaskStore& store;
  httplib::Server http;

  explicit Impl(TaskStore& s) : store(s) {
    http.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, json{{"status", "ok"}});
    });

    http.Get("/api/progress", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, store.progress());
    });

    http.Get("/api/tasks/next", [this](const httplib::Request& req, httplib::Response& res) {
      const auto rater = req.get_param_value("rater");
      if (rater.empty()) return send_error(res, 400, "bad_request", "missing rater parameter");
      const auto who = store.rater_for_token(bearer(req));
      if (!who) return send_error(res, 401, "unauthorized", "missing or invalid bearer token");
      if (*who != rater) {
        return send_error(res, 403, "forbidden", "token does not belong to rater " + rater);
      }
      try {
        auto task = store.next_task(rater);
        if (!task) {
          res.status = 204;
          return;
        }
        send_json(res, 200, task_view(*task));
      } catch (const AuthorizationError& e) {
        send_error(res, 403, "forbidden", e.what());
      }
    });

    http.Post(R"(/api/tasks/([0-9A-Za-z_-]+)/submit)", [this](const httplib::Request& req, httplib::Response& res) {
      const auto id = req.matches[1].str();
      const auto who = store.rater_for_token(bearer(req));
      if (!who) return send_error(res, 401, "unauthorized", "missing or invalid bearer token");
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::exception& e) {
        return send_error(res, 400, "bad_request", "body is not valid JSON", json{{"parser", e.what()}});
      }
      try {
        const auto row = store.submit(id, *who, body);
        send_json(res, 200, json{{"status", "accepted"}, {"task_id", id}, {"item_id", row.item_id}});
      } catch (const ValidationError& e) {
        send_error(res, 422, "validation_failed", e.what(), json{{"task_id", id}});
      } catch (const ConflictError& e) {
        send_error(res, 409, "already_submitted", e.what(), json{{"task_id", id}});
      } catch (const NotFoundError& e) {
        send_error(res, 404, "not_found", e.what(), json{{"task_id", id}});
      } catch (const AuthorizationError& e) {
        send_error(res, 403, "forbidden", e.what(), json{{"task_id", id}});
      }
    });

    http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string what = "internal error";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        what = e.what();
      } catch (...) {
      }
      spdlog::error("annotation service: {}", what);
      send_error(res, 500, "internal", what);
    });

    http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.status == 404 && res.body.empty()) send_error(res, 404, "not_found", "no such endpoint");
    });
  }
};

Server::Server(TaskStore& store) : impl_(std::make_unique<Impl>(store)) {}

Server::~Server() { stop(); }

int Server::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->http.bind_to_any_port(host);
    if (bound <= 0) throw Error("cannot bind annotation service on " + host);
    return bound;
  }
  if (!impl_->http.bind_to_port(host, port)) {
    throw Error("cannot bind annotation service on " + host + ":" + std::to_string(port));
  }
  return port;
}

void Server::serve() { impl_->http.listen_after_bind(); }

void Server::stop() {
  if (impl_) impl_->http.stop();
}

}  // namespace sentdiag::annotation
