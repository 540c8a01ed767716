#include "rforge/review_server.hpp"

#include <httplib.h>

#include "rforge/error.hpp"
#include "rforge/rubric.hpp"

namespace rforge {

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kTaskNotFound: return 404;
    case ErrorCode::kTaskClosed: return 409;
    case ErrorCode::kKindMismatch: return 422;
    case ErrorCode::kMalformedTask: return 400;
    default: return 500;
  }
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code,
                const std::string& message) {
  send_json(res, status, {{"error", code}, {"message", message}});
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    send_error(res, http_status_for(e.code()), error_code_name(e.code()), e.what());
  } catch (const json::exception& e) {
    send_error(res, 400, "InvalidJson", e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "Internal", e.what());
  }
}

std::optional<ReviewKind> kind_param(const httplib::Request& req) {
  if (!req.has_param("kind") || req.get_param_value("kind").empty()) return std::nullopt;
  return parse_review_kind(req.get_param_value("kind"));
}

ReviewTask task_from_json(const json& j) {
  ReviewTask t;
  t.id = j.value("id", std::string());
  t.kind = parse_review_kind(j.value("kind", std::string()));
  t.payload = j.value("payload", json::object());
  return t;
}

}  // namespace

ReviewServer::ReviewServer(ReviewStore& store, ReviewServerOptions options)
    : store_(store), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  routes();
}

ReviewServer::~ReviewServer() { stop(); }

void ReviewServer::routes() {
  auto& srv = *server_;
  const auto token = options_.token;
  srv.set_pre_routing_handler([token](const httplib::Request& req, httplib::Response& res) {
    const bool api = req.path.rfind("/tasks", 0) == 0 || req.path == "/export" ||
                     req.path == "/rubric";
    if (token.empty() || !api) {
      return httplib::Server::HandlerResponse::Unhandled;
    }
    const auto bearer = req.get_header_value("Authorization");
    if (req.get_header_value("X-Review-Token") == token || bearer == "Bearer " + token) {
      return httplib::Server::HandlerResponse::Unhandled;
    }
    send_error(res, 401, "Unauthorized", "missing or wrong review token");
    return httplib::Server::HandlerResponse::Handled;
  });

  srv.Get("/tasks", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      std::optional<TaskStatus> status = TaskStatus::kOpen;
      if (req.has_param("status")) {
        const auto s = req.get_param_value("status");
        status = s == "all" || s.empty() ? std::nullopt : std::optional(parse_task_status(s));
      }
      json tasks = json::array();
      for (const auto& t : store_.list(kind_param(req), status)) tasks.push_back(t.public_json());
      send_json(res, 200, {{"tasks", tasks}});
    });
  });

  srv.Get(R"(/tasks/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto task = store_.get(req.matches[1]);
      if (!task) throw Error(ErrorCode::kTaskNotFound, "no task " + std::string(req.matches[1]));
      send_json(res, 200, task->public_json());
    });
  });

  srv.Post("/tasks", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = json::parse(req.body);
      std::vector<ReviewTask> tasks;
      for (const auto& t : body.at("tasks")) tasks.push_back(task_from_json(t));
      const auto r = store_.enqueue(tasks);
      send_json(res, 200, {{"accepted", r.accepted}, {"duplicates", r.duplicates}});
    });
  });

  srv.Post(R"(/tasks/([^/]+)/verdict)", [this](const httplib::Request& req,
                                               httplib::Response& res) {
    guarded(res, [&] {
      auto body = json::parse(req.body);
      std::string annotator = "anonymous";
      if (body.contains("annotator")) {
        annotator = body["annotator"].get<std::string>();
        body.erase("annotator");
      }
      const auto task = store_.submit_verdict(req.matches[1], body, annotator);
      send_json(res, 200, task.public_json());
    });
  });

  srv.Get("/export", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto r = store_.export_verdicts(options_.export_dir, kind_param(req));
      json counts = json::object();
      for (const auto& [file, n] : r.counts) counts[file] = n;
      send_json(res, 200, {{"dir", options_.export_dir.string()}, {"counts", counts}});
    });
  });

  srv.Get("/rubric", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, rubric_json());
  });

  if (!options_.static_dir.empty() && std::filesystem::is_directory(options_.static_dir)) {
    srv.set_mount_point("/", options_.static_dir.string());
  }
}

int ReviewServer::start() {
  if (options_.port == 0) {
    port_ = server_->bind_to_any_port(options_.host);
  } else {
    port_ = server_->bind_to_port(options_.host, options_.port) ? options_.port : -1;
  }
  if (port_ < 0) {
    throw Error(ErrorCode::kIo, "cannot bind " + options_.host + ":" +
                                    std::to_string(options_.port));
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void ReviewServer::run() {
  start();
  thread_.join();
}

void ReviewServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace rforge
