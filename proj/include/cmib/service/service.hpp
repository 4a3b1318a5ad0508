#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "cmib/model/checkpoint.hpp"

namespace cmib::service {

struct Response {
  int status = 200;
  std::string body;  // JSON
};

struct NamedPose {
  std::string name;
  geom::Pose pose;
};

/// Request handlers over one immutable loaded checkpoint.
///
/// Wire format: positions in meters as [x, y, z], quaternions as
/// [w, x, y, z]. Errors are {"error": {"code", "message", "field"?}} with
/// status 400 (invalid request), 422 (unknown label) or 503 (no model).
/// Handlers are safe to call concurrently.
class InferenceService {
 public:
  void load(const std::filesystem::path& checkpoint);
  void load(model::Checkpoint ck);
  bool loaded() const;

  // Poses offered to clients as start/target candidates (GET /v1/poses).
  void set_pose_library(std::vector<NamedPose> poses);

  Response handle_infill(const std::string& body) const;
  Response handle_metadata() const;
  Response handle_poses() const;
  Response handle_health() const;

 private:
  struct Loaded {
    model::Checkpoint checkpoint;
    model::CmibModel<float> model;
    std::string version;
  };
  std::shared_ptr<const Loaded> current() const;

  mutable std::mutex mu_;
  std::shared_ptr<const Loaded> loaded_;
  std::shared_ptr<const std::vector<NamedPose>> poses_;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cors_origin = "*";  // empty disables CORS headers
};

/// Routes POST /v1/infill, GET /v1/metadata, GET /v1/poses and GET /healthz
/// (plus CORS preflight) to an InferenceService.
class HttpServer {
 public:
  HttpServer(InferenceService& service, ServerOptions opts);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds the socket and returns the port (port 0 picks a free one).
  // Throws IoError when binding fails.
  int bind();
  // Serves until stop(); call bind() first.
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// bind() + listen() until the process is stopped.
void run_server(InferenceService& service, const ServerOptions& opts);

}  // namespace cmib::service
