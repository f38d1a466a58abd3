#include "capfuse/study_server.hpp"

#include <httplib.h>

#include <fstream>
#include <sstream>

#include "capfuse/error.hpp"

namespace capfuse {

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(dump_compact(body), "application/json");
}

void reply_error(httplib::Response& res, int status, const Error& e) {
  reply(res, status, json{{"error", errc_name(e.code())}});
}

std::string content_type_for(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".png") return "image/png";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  return "application/octet-stream";
}

}  // namespace

StudyServer::StudyServer(StudyStore& store, StudyServerOptions options)
    : store_(store), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

StudyServer::~StudyServer() { stop(); }

void StudyServer::install_routes() {
  auto& srv = *server_;

  srv.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, json{{"status", "ok"}});
  });

  srv.Get("/api/task", [this](const httplib::Request& req, httplib::Response& res) {
    const auto worker = req.get_param_value("worker");
    const auto cls = parse_worker_class(req.get_param_value("class"));
    if (worker.empty() || !cls) {
      reply(res, 400, json{{"error", "worker and class (generic|expert) are required"}});
      return;
    }
    auto ballot = store_.issue(worker, *cls);
    if (!ballot) {
      reply(res, 200, json{{"done", true}});
      return;
    }
    reply(res, 200, to_json(*ballot));
  });

  srv.Post("/api/vote", [this](const httplib::Request& req, httplib::Response& res) {
    Vote vote;
    try {
      const auto body = json::parse(req.body);
      vote.ballot_id = body.at("ballot_id").get<std::string>();
      vote.choice = body.at("choice").get<std::string>();
    } catch (const json::exception&) {
      reply(res, 400, json{{"error", "body must be {\"ballot_id\", \"choice\"}"}});
      return;
    }
    try {
      store_.record(vote);
      reply(res, 200, json{{"ok", true}});
    } catch (const Error& e) {
      switch (e.code()) {
        case Errc::UnknownBallot: reply_error(res, 410, e); break;
        case Errc::DuplicateVote:
        case Errc::RepeatRater:
        case Errc::ClassQuotaExceeded: reply_error(res, 409, e); break;
        case Errc::InvalidChoice: reply_error(res, 400, e); break;
        default: reply_error(res, 500, e); break;
      }
    }
  });

  srv.Get("/api/results", [this](const httplib::Request& req, httplib::Response& res) {
    if (options_.admin_token.empty() || req.get_header_value("Authorization") != "Bearer " + options_.admin_token) {
      reply(res, 403, json{{"error", "admin token required"}});
      return;
    }
    json hist = json::object();
    for (const auto& [level, count] : store_.histogram()) hist[std::to_string(level)] = count;
    reply(res, 200, json{{"summary", to_json(store_.summary())}, {"agreement_histogram", std::move(hist)},
                         {"votes", store_.votes()->size()}});
  });

  srv.Get(R"(/api/image/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
    const auto* img = store_.image(req.matches[1]);
    if (!img) {
      reply(res, 404, json{{"error", "unknown image"}});
      return;
    }
    std::string uri = img->uri;
    if (uri.rfind("http://", 0) == 0 || uri.rfind("https://", 0) == 0) {
      res.set_redirect(uri);
      return;
    }
    if (uri.rfind("file://", 0) == 0) uri = uri.substr(7);
    std::ifstream in(uri, std::ios::binary);
    if (!in) {
      reply(res, 404, json{{"error", "image not readable"}});
      return;
    }
    std::ostringstream bytes;
    bytes << in.rdbuf();
    res.set_content(bytes.str(), content_type_for(uri));
  });

  if (options_.static_dir) srv.set_mount_point("/", options_.static_dir->string());
}

int StudyServer::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  return server_->bind_to_port(host, port) ? port : -1;
}

bool StudyServer::listen_after_bind() { return server_->listen_after_bind(); }

void StudyServer::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

void StudyServer::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace capfuse
