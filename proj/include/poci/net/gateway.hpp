#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "poci/denoiser.hpp"

namespace poci::net {

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// "http://host:port" or "host:port".
struct Endpoint {
  std::string host = "127.0.0.1";
  int port = 0;

  static Endpoint parse(const std::string& url);
  /// Listen address; port 0 asks the OS for a free port.
  static Endpoint parse_listen(const std::string& address);
  std::string url() const { return "http://" + host + ":" + std::to_string(port); }
};

struct BackendDescriptor {
  std::string name;
  int channels = 0;
  int max_batch = 1;
};

/// Wire-level failure of one request in a batch.
struct GatewayError : DenoiserError {
  enum class Kind { transport, timeout, malformed, shape, backend };
  Kind kind;

  GatewayError(Kind k, const std::string& message, std::string path, int t)
      : DenoiserError(message, std::move(path), t), kind(k) {}
};

const char* kind_name(GatewayError::Kind k);

struct BackendUnreachable : Error {
  using Error::Error;
};

struct BackendIncompatible : Error {
  using Error::Error;
};

struct StepRequest {
  std::string job_id;
  std::string path_id;
  int timestep = 0;
  LatentTensor latent;
  std::string prompt;
  png::Bytes depth_png;
  std::optional<std::string> reference_id;
  // carried alongside the id so a backend in another process can resolve it
  std::optional<std::vector<float>> reference_signature;
  double guidance = 7.5;
  std::uint64_t seed = 0;
};

struct StepResponse {
  std::string path_id;
  int timestep = 0;
  LatentTensor latent;
};

nlohmann::json to_json(const StepRequest& r);
nlohmann::json to_json(const StepResponse& r);
/// Throws ParseError or ShapeError.
StepRequest step_request_from_json(const nlohmann::json& j);
StepResponse step_response_from_json(const nlohmann::json& j);

inline constexpr std::chrono::seconds kDefaultStepTimeout{120};

/// POST /v1/step. One response per request, in order. Throws GatewayError carrying the path
/// id and timestep of the first offending request (the first of the batch for whole-batch
/// failures).
std::vector<StepResponse> remote_step(const Endpoint& endpoint, const std::vector<StepRequest>& batch,
                                      std::chrono::milliseconds timeout = kDefaultStepTimeout);

/// GET /v1/health. Throws BackendUnreachable.
BackendDescriptor health_check(const Endpoint& endpoint, std::chrono::milliseconds timeout = std::chrono::seconds(5));

/// Throws BackendIncompatible if the backend's latent channel count differs.
void require_channels(const BackendDescriptor& backend, int channels);

/// Denoiser backed by a remote step server. Reference signatures are looked up in
/// `references` and shipped with each request that names one.
class RemoteDenoiser : public Denoiser {
 public:
  struct Options {
    std::chrono::milliseconds timeout = kDefaultStepTimeout;
    std::string job_id = "job";
  };

  RemoteDenoiser(Endpoint endpoint, BackendDescriptor descriptor, std::shared_ptr<const ReferenceStore> references,
                 Options options);

  /// Runs health_check and require_channels before returning.
  static std::unique_ptr<RemoteDenoiser> connect(const Endpoint& endpoint, int channels,
                                                 std::shared_ptr<const ReferenceStore> references, Options options);

  std::string name() const override { return descriptor_.name; }
  int max_batch() const override { return descriptor_.max_batch; }
  const BackendDescriptor& descriptor() const { return descriptor_; }

  LatentTensor step(const PathStep& call) override;
  std::vector<LatentTensor> step_batch(std::span<const PathStep> batch) override;

 private:
  StepRequest make_request(const PathStep& call) const;

  Endpoint endpoint_;
  BackendDescriptor descriptor_;
  std::shared_ptr<const ReferenceStore> references_;
  Options options_;
};

/// Serves a Denoiser over POST /v1/step and GET /v1/health. Shipped reference signatures
/// are written to `references`, which the denoiser should read from.
class StepServer {
 public:
  StepServer(Denoiser& denoiser, BackendDescriptor descriptor, std::shared_ptr<ReferenceStore> references);
  ~StepServer();
  StepServer(const StepServer&) = delete;
  StepServer& operator=(const StepServer&) = delete;

  /// Binds (port 0 picks a free port) and serves on a background thread. Returns the port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Blocks until the server started by start() exits.
  void join();
  void stop();

  Endpoint endpoint() const { return {host_, port_}; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  std::string host_;
  int port_ = 0;
};

}  // namespace poci::net
