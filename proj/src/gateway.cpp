#include "poci/net/gateway.hpp"

#include <map>
#include <mutex>

#include "httplib.h"
#include "poci/hash.hpp"

namespace poci::net {

using nlohmann::json;

namespace {

Endpoint parse_endpoint(const std::string& url, int min_port) {
  std::string rest = url;
  if (rest.rfind("http://", 0) == 0) rest = rest.substr(7);
  while (!rest.empty() && rest.back() == '/') rest.pop_back();
  const auto colon = rest.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == rest.size())
    throw ParseError("endpoint \"" + url + "\": expected host:port");
  Endpoint e;
  e.host = rest.substr(0, colon);
  try {
    std::size_t used = 0;
    e.port = std::stoi(rest.substr(colon + 1), &used);
    if (used != rest.size() - colon - 1) throw std::invalid_argument("port");
  } catch (const std::exception&) {
    throw ParseError("endpoint \"" + url + "\": bad port");
  }
  if (e.port < min_port || e.port > 65535) throw ParseError("endpoint \"" + url + "\": port out of range");
  return e;
}

}  // namespace

Endpoint Endpoint::parse(const std::string& url) { return parse_endpoint(url, 1); }
Endpoint Endpoint::parse_listen(const std::string& address) { return parse_endpoint(address, 0); }

const char* kind_name(GatewayError::Kind k) {
  switch (k) {
    case GatewayError::Kind::transport: return "transport error";
    case GatewayError::Kind::timeout: return "timeout";
    case GatewayError::Kind::malformed: return "malformed response";
    case GatewayError::Kind::shape: return "shape mismatch";
    case GatewayError::Kind::backend: return "backend error";
  }
  return "error";
}

namespace {

json latent_to_json(const LatentTensor& t) {
  return json{{"shape", {t.channels(), t.height(), t.width()}}, {"data", base64_encode(latent_payload(t))}};
}

const json& member(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(std::string("missing field \"") + key + "\"");
  return j.at(key);
}

std::string get_string(const json& j, const char* key) {
  const auto& v = member(j, key);
  if (!v.is_string()) throw ParseError(std::string("field \"") + key + "\" must be a string");
  return v.get<std::string>();
}

int get_int(const json& j, const char* key) {
  const auto& v = member(j, key);
  if (!v.is_number_integer()) throw ParseError(std::string("field \"") + key + "\" must be an integer");
  return v.get<int>();
}

LatentTensor latent_from_json(const json& j) {
  const auto& shape = member(j, "shape");
  if (!shape.is_array() || shape.size() != 3) throw ParseError("latent shape must be [channels, height, width]");
  for (const auto& d : shape)
    if (!d.is_number_integer() || d.get<long long>() <= 0 || d.get<long long>() > (1 << 16))
      throw ParseError("latent shape entries must be positive integers");
  const LatentShape s{shape[0].get<int>(), shape[1].get<int>(), shape[2].get<int>()};
  const auto bytes = base64_decode(get_string(j, "data"));
  return latent_from_payload(s, bytes);
}

std::vector<float> floats_from_base64(const std::string& text) {
  const auto bytes = base64_decode(text);
  if (bytes.size() % 4 != 0) throw ParseError("reference signature is not a whole number of floats");
  const auto t = latent_from_payload({1, 1, static_cast<int>(bytes.size() / 4)}, bytes);
  return {t.values().begin(), t.values().end()};
}

std::string floats_to_base64(const std::vector<float>& v) {
  LatentTensor t({1, 1, static_cast<int>(v.size())});
  std::copy(v.begin(), v.end(), t.values().begin());
  return base64_encode(latent_payload(t));
}

void set_timeouts(httplib::Client& cli, std::chrono::milliseconds timeout) {
  const auto sec = static_cast<time_t>(timeout.count() / 1000);
  const auto usec = static_cast<time_t>((timeout.count() % 1000) * 1000);
  cli.set_connection_timeout(sec, usec);
  cli.set_read_timeout(sec, usec);
  cli.set_write_timeout(sec, usec);
}

}  // namespace

json to_json(const StepRequest& r) {
  json cond{{"prompt", r.prompt},
            {"depth_png", base64_encode(r.depth_png)},
            {"reference_id", r.reference_id ? json(*r.reference_id) : json(nullptr)},
            {"guidance", r.guidance}};
  if (r.reference_signature) cond["reference_signature"] = floats_to_base64(*r.reference_signature);
  return json{{"job_id", r.job_id},   {"path_id", r.path_id},
              {"timestep", r.timestep}, {"latent", latent_to_json(r.latent)},
              {"conditioning", cond},   {"seed", r.seed}};
}

json to_json(const StepResponse& r) {
  return json{{"path_id", r.path_id}, {"timestep", r.timestep}, {"latent", latent_to_json(r.latent)}};
}

StepRequest step_request_from_json(const json& j) {
  StepRequest r;
  r.job_id = get_string(j, "job_id");
  r.path_id = get_string(j, "path_id");
  r.timestep = get_int(j, "timestep");
  r.latent = latent_from_json(member(j, "latent"));
  const auto& cond = member(j, "conditioning");
  r.prompt = get_string(cond, "prompt");
  r.depth_png = base64_decode(get_string(cond, "depth_png"));
  if (cond.contains("reference_id") && !cond.at("reference_id").is_null())
    r.reference_id = get_string(cond, "reference_id");
  if (cond.contains("reference_signature"))
    r.reference_signature = floats_from_base64(get_string(cond, "reference_signature"));
  const auto& g = member(cond, "guidance");
  if (!g.is_number()) throw ParseError("field \"guidance\" must be a number");
  r.guidance = g.get<double>();
  const auto& seed = member(j, "seed");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0))
    throw ParseError("field \"seed\" must be a non-negative integer");
  r.seed = seed.get<std::uint64_t>();
  return r;
}

StepResponse step_response_from_json(const json& j) {
  return {get_string(j, "path_id"), get_int(j, "timestep"), latent_from_json(member(j, "latent"))};
}

std::vector<StepResponse> remote_step(const Endpoint& endpoint, const std::vector<StepRequest>& batch,
                                      std::chrono::milliseconds timeout) {
  if (batch.empty()) throw Error("remote_step: empty batch");
  const auto& first = batch.front();
  auto fail = [&](GatewayError::Kind k, const std::string& msg, const StepRequest& req) {
    return GatewayError(k, std::string(kind_name(k)) + ": " + msg, req.path_id, req.timestep);
  };

  json body = json::array();
  for (const auto& r : batch) body.push_back(to_json(r));

  httplib::Client cli(endpoint.host, endpoint.port);
  set_timeouts(cli, timeout);
  const auto started = std::chrono::steady_clock::now();
  auto res = cli.Post("/v1/step", body.dump(), "application/json");
  if (!res) {
    const auto elapsed = std::chrono::steady_clock::now() - started;
    const bool timed_out = res.error() == httplib::Error::ConnectionTimeout || elapsed >= timeout;
    throw fail(timed_out ? GatewayError::Kind::timeout : GatewayError::Kind::transport,
               endpoint.url() + ": " + httplib::to_string(res.error()), first);
  }
  if (res->status != 200) {
    std::string msg = "HTTP " + std::to_string(res->status);
    std::string path = first.path_id;
    int t = first.timestep;
    auto err = json::parse(res->body, nullptr, false);
    if (err.is_object()) {
      if (err.contains("error") && err["error"].is_string()) msg += ": " + err["error"].get<std::string>();
      if (err.contains("path_id") && err["path_id"].is_string()) path = err["path_id"].get<std::string>();
      if (err.contains("timestep") && err["timestep"].is_number_integer()) t = err["timestep"].get<int>();
    }
    throw GatewayError(GatewayError::Kind::backend, std::string(kind_name(GatewayError::Kind::backend)) + ": " + msg,
                       path, t);
  }

  auto doc = json::parse(res->body, nullptr, false);
  if (doc.is_discarded() || !doc.is_array()) throw fail(GatewayError::Kind::malformed, "body is not a JSON array", first);
  if (doc.size() != batch.size())
    throw fail(GatewayError::Kind::malformed,
               std::to_string(doc.size()) + " responses for " + std::to_string(batch.size()) + " requests", first);
  std::vector<StepResponse> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& req = batch[i];
    StepResponse r;
    try {
      r = step_response_from_json(doc[i]);
    } catch (const ShapeError& e) {
      throw fail(GatewayError::Kind::malformed, e.what(), req);
    } catch (const ParseError& e) {
      throw fail(GatewayError::Kind::malformed, e.what(), req);
    }
    if (r.path_id != req.path_id || r.timestep != req.timestep)
      throw fail(GatewayError::Kind::malformed,
                 "response " + std::to_string(i) + " is for path " + r.path_id + " at timestep " +
                     std::to_string(r.timestep),
                 req);
    if (r.latent.shape() != req.latent.shape())
      throw fail(GatewayError::Kind::shape,
                 "response shape " + r.latent.shape().to_string() + ", request " + req.latent.shape().to_string(), req);
    out.push_back(std::move(r));
  }
  return out;
}

BackendDescriptor health_check(const Endpoint& endpoint, std::chrono::milliseconds timeout) {
  httplib::Client cli(endpoint.host, endpoint.port);
  set_timeouts(cli, timeout);
  auto res = cli.Get("/v1/health");
  if (!res) throw BackendUnreachable("backend " + endpoint.url() + " unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw BackendUnreachable("backend " + endpoint.url() + " health check returned HTTP " +
                             std::to_string(res->status));
  auto doc = json::parse(res->body, nullptr, false);
  try {
    BackendDescriptor d{get_string(doc, "name"), get_int(doc, "channels"), get_int(doc, "max_batch")};
    if (d.channels <= 0 || d.max_batch <= 0) throw ParseError("channels and max_batch must be positive");
    return d;
  } catch (const ParseError& e) {
    throw BackendUnreachable("backend " + endpoint.url() + " sent a bad health descriptor: " + e.what());
  }
}

void require_channels(const BackendDescriptor& backend, int channels) {
  if (backend.channels != channels)
    throw BackendIncompatible("backend \"" + backend.name + "\" produces " + std::to_string(backend.channels) +
                              "-channel latents, session uses " + std::to_string(channels));
}

RemoteDenoiser::RemoteDenoiser(Endpoint endpoint, BackendDescriptor descriptor,
                               std::shared_ptr<const ReferenceStore> references, Options options)
    : endpoint_(std::move(endpoint)),
      descriptor_(std::move(descriptor)),
      references_(std::move(references)),
      options_(std::move(options)) {}

std::unique_ptr<RemoteDenoiser> RemoteDenoiser::connect(const Endpoint& endpoint, int channels,
                                                        std::shared_ptr<const ReferenceStore> references,
                                                        Options options) {
  auto d = health_check(endpoint);
  require_channels(d, channels);
  return std::make_unique<RemoteDenoiser>(endpoint, std::move(d), std::move(references), std::move(options));
}

StepRequest RemoteDenoiser::make_request(const PathStep& call) const {
  StepRequest r;
  r.job_id = options_.job_id;
  r.path_id = call.path_id;
  r.timestep = call.timestep;
  r.latent = call.latent;
  const auto& cond = call.conditioning;
  r.prompt = cond.prompt;
  if (cond.control) r.depth_png = cond.control->png();
  r.reference_id = cond.reference_id;
  if (cond.reference_id && references_) r.reference_signature = references_->get(*cond.reference_id);
  r.guidance = cond.guidance;
  r.seed = call.seed;
  return r;
}

LatentTensor RemoteDenoiser::step(const PathStep& call) {
  return std::move(remote_step(endpoint_, {make_request(call)}, options_.timeout).front().latent);
}

std::vector<LatentTensor> RemoteDenoiser::step_batch(std::span<const PathStep> batch) {
  std::vector<LatentTensor> out;
  out.reserve(batch.size());
  const std::size_t chunk = static_cast<std::size_t>(std::max(1, descriptor_.max_batch));
  for (std::size_t b = 0; b < batch.size(); b += chunk) {
    std::vector<StepRequest> reqs;
    for (std::size_t i = b; i < std::min(batch.size(), b + chunk); ++i) reqs.push_back(make_request(batch[i]));
    for (auto& r : remote_step(endpoint_, reqs, options_.timeout)) out.push_back(std::move(r.latent));
  }
  return out;
}

struct StepServer::Impl {
  Denoiser& denoiser;
  BackendDescriptor descriptor;
  std::shared_ptr<ReferenceStore> references;
  httplib::Server http;
  std::mutex mutex;  // serializes denoiser calls and the control cache
  std::map<std::uint64_t, std::shared_ptr<const DepthControl>> controls;

  Impl(Denoiser& d, BackendDescriptor desc, std::shared_ptr<ReferenceStore> refs)
      : denoiser(d), descriptor(std::move(desc)), references(std::move(refs)) {
    http.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(json{{"name", descriptor.name}, {"channels", descriptor.channels},
                           {"max_batch", descriptor.max_batch}}
                          .dump(),
                      "application/json");
    });
    http.Post("/v1/step", [this](const httplib::Request& req, httplib::Response& res) { handle_step(req, res); });
  }

  std::shared_ptr<const DepthControl> control_for(const png::Bytes& bytes) {
    if (bytes.empty()) return nullptr;
    const auto key = fnv1a64(std::span<const std::uint8_t>(bytes));
    if (auto it = controls.find(key); it != controls.end() && it->second->png() == bytes) return it->second;
    if (controls.size() >= 32) controls.clear();
    auto ctrl = DepthControl::from_png(bytes);
    controls[key] = ctrl;
    return ctrl;
  }

  static void reply_error(httplib::Response& res, int status, const std::string& msg, const std::string& path = "",
                          int t = -1) {
    json err{{"error", msg}};
    if (!path.empty()) {
      err["path_id"] = path;
      err["timestep"] = t;
    }
    res.status = status;
    res.set_content(err.dump(), "application/json");
  }

  void handle_step(const httplib::Request& req, httplib::Response& res) {
    auto doc = json::parse(req.body, nullptr, false);
    if (doc.is_discarded() || !doc.is_array() || doc.empty())
      return reply_error(res, 400, "body must be a non-empty JSON array of step requests");
    if (doc.size() > static_cast<std::size_t>(descriptor.max_batch))
      return reply_error(res, 413, "batch exceeds max_batch " + std::to_string(descriptor.max_batch));
    std::vector<StepRequest> reqs;
    try {
      for (const auto& j : doc) reqs.push_back(step_request_from_json(j));
    } catch (const Error& e) {
      return reply_error(res, 400, std::string("bad step request: ") + e.what());
    }

    std::lock_guard lock(mutex);
    std::vector<Conditioning> conds;
    conds.reserve(reqs.size());
    try {
      for (const auto& r : reqs) {
        if (r.reference_id && r.reference_signature) references->put(*r.reference_id, *r.reference_signature);
        conds.push_back({r.prompt, control_for(r.depth_png), r.reference_id, r.guidance});
      }
    } catch (const Error& e) {
      return reply_error(res, 400, std::string("bad depth control: ") + e.what());
    }
    std::vector<PathStep> calls;
    calls.reserve(reqs.size());
    for (std::size_t i = 0; i < reqs.size(); ++i)
      calls.push_back({reqs[i].path_id, reqs[i].timestep, reqs[i].latent, conds[i], reqs[i].seed});

    std::vector<LatentTensor> preds;
    try {
      preds = denoiser.step_batch(calls);
    } catch (const DenoiserError& e) {
      return reply_error(res, 500, e.what(), e.path_id, e.timestep);
    } catch (const std::exception& e) {
      return reply_error(res, 500, e.what());
    }
    json out = json::array();
    for (std::size_t i = 0; i < reqs.size(); ++i)
      out.push_back(to_json(StepResponse{reqs[i].path_id, reqs[i].timestep, std::move(preds[i])}));
    res.set_content(out.dump(), "application/json");
  }
};

StepServer::StepServer(Denoiser& denoiser, BackendDescriptor descriptor, std::shared_ptr<ReferenceStore> references)
    : impl_(std::make_unique<Impl>(denoiser, std::move(descriptor), std::move(references))) {}

StepServer::~StepServer() { stop(); }

int StepServer::start(const std::string& host, int port) {
  host_ = host;
  if (port == 0) {
    port_ = impl_->http.bind_to_any_port(host);
  } else {
    port_ = impl_->http.bind_to_port(host, port) ? port : -1;
  }
  if (port_ <= 0) throw Error("step server: cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
  return port_;
}

void StepServer::join() {
  if (thread_.joinable()) thread_.join();
}

void StepServer::stop() {
  if (impl_) impl_->http.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace poci::net
