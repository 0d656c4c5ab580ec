#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "json.hpp"

namespace poci::net {

struct ServiceConfig {
  std::string listen = "127.0.0.1:8080";
  std::filesystem::path data_dir = "poci-data";
  // "toy" (in-process) or a step server URL
  std::string backend = "toy";
  int latent_channels = 4;
  int default_steps = 50;
  // per-dispatch sleep of the in-process toy backend
  int toy_latency_ms = 0;

  /// Unknown keys are rejected.
  static ServiceConfig from_json(const nlohmann::json& j);

  /// POCI_LISTEN, POCI_DATA_DIR, POCI_BACKEND, POCI_LATENT_CHANNELS, POCI_DEFAULT_STEPS,
  /// POCI_TOY_LATENCY_MS.
  void apply_env(const std::function<const char*(const char*)>& getenv);
};

/// File (optional) then environment overrides. Throws poci::Error on bad values.
ServiceConfig load_service_config(const std::optional<std::filesystem::path>& file,
                                  const std::function<const char*(const char*)>& getenv);

struct Reply {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";

  nlohmann::json json() const { return nlohmann::json::parse(body); }
};

/// Sessions, previews and generation jobs over a content-addressed data directory:
///   <data_dir>/objects/<sha256>       latent snapshots, previews
///   <data_dir>/sessions/<id>.json     committed session state
/// Every method is safe to call concurrently; each maps 1:1 onto an HTTP route.
class SessionService {
 public:
  explicit SessionService(ServiceConfig config);
  ~SessionService();
  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  const ServiceConfig& config() const;

  Reply create_session(const std::string& body);                                  // POST /sessions
  Reply get_session(const std::string& id);                                       // GET /sessions/{id}
  Reply preview(const std::string& id, const std::string& kind);                  // GET /sessions/{id}/preview
  Reply submit_job(const std::string& session_id, const std::string& body);       // POST /sessions/{id}/jobs
  Reply get_job(const std::string& id);                                           // GET /jobs/{id}
  Reply get_image(const std::string& hash);                                       // GET /images/{hash}

  /// Blocks until no job is queued or running.
  void wait_idle();

  /// Serves the routes on a background thread. Port 0 picks a free port; returns the port.
  int start(const std::string& host, int port);
  /// Blocks until the server started by start() exits.
  void join();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace poci::net
