#pragma once

#include <memory>
#include <string>

#include "sentdiag/annotation.hpp"

namespace sentdiag::annotation {

// JSON API over a TaskStore:
//   GET  /api/tasks/next?rater=<id>   task view, or 204 when the queue is empty
//   POST /api/tasks/<id>/submit       rubric row; 200, 409 or 422
//   GET  /api/progress                tallies
//   GET  /api/health                  liveness
// Task endpoints need "Authorization: Bearer <token>" for the rater.
// Errors are {"code", "message", "details"}.
class Server {
 public:
  explicit Server(TaskStore& store);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Port 0 picks a free port. Returns the bound port, throws on failure.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace sentdiag::annotation
