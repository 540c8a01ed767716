#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <thread>

#include "rforge/error.hpp"
#include "rforge/review.hpp"

namespace httplib {
class Server;
}

namespace rforge {

struct ReviewServerOptions {
  std::string host = "127.0.0.1";
  int port = 8765;  // 0 picks a free port
  std::string token;  // shared token; empty disables the check
  std::filesystem::path static_dir;  // review UI bundle, optional
  std::filesystem::path export_dir;  // where GET /export writes
};

// HTTP front end of a ReviewStore:
//   GET  /tasks?kind=&status=    open tasks oldest first
//   GET  /tasks/{id}
//   POST /tasks                  {tasks: [...]} -> {accepted, duplicates}
//   POST /tasks/{id}/verdict     {verdict..., annotator}
//   GET  /export?kind=           writes the export files, returns their counts
//   GET  /rubric
// Errors come back as {error, message} with 400/401/404/409/422.
class ReviewServer {
 public:
  ReviewServer(ReviewStore& store, ReviewServerOptions options);
  ~ReviewServer();
  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  // Binds and serves on a background thread; returns the bound port.
  int start();
  // Binds and serves on the calling thread until stop().
  void run();
  void stop();
  int port() const { return port_; }

 private:
  void routes();

  ReviewStore& store_;
  ReviewServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

// HTTP status for a review error code.
int http_status_for(ErrorCode code);

}  // namespace rforge
