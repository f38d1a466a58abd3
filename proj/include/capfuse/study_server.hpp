#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "capfuse/study.hpp"

namespace httplib {
class Server;
}

namespace capfuse {

struct StudyServerOptions {
  // GET /api/results requires "Authorization: Bearer <admin_token>"; results
  // name the models, so they stay off the worker-facing surface.
  std::string admin_token;
  std::optional<std::filesystem::path> static_dir;  // judge UI assets
};

// Routes:
//   GET  /api/health
//   GET  /api/task?worker=W&class=generic|expert  -> ballot or {"done": true}
//   POST /api/vote {"ballot_id", "choice"}        -> 200 / 400 / 409 / 410
//   GET  /api/results                             -> summary + agreement histogram (admin)
//   GET  /api/image/<image_id>                    -> image bytes or redirect to the corpus uri
class StudyServer {
 public:
  StudyServer(StudyStore& store, StudyServerOptions options = {});
  ~StudyServer();

  StudyServer(const StudyServer&) = delete;
  StudyServer& operator=(const StudyServer&) = delete;

  // Returns the bound port.
  int bind(const std::string& host, int port = 0);
  // Blocks until stop().
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

 private:
  void install_routes();

  StudyStore& store_;
  StudyServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace capfuse
