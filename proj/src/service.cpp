#include "poci/net/service.hpp"

#include <atomic>
#include <condition_variable>
#include <map>
#include <mutex>
#include <random>
#include <thread>

#include "httplib.h"
#include "poci/layout_io.hpp"
#include "poci/net/gateway.hpp"
#include "poci/net/store.hpp"
#include "poci/orchestrator.hpp"
#include "poci/toy_denoiser.hpp"

namespace poci::net {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int parse_positive(const std::string& text, const char* what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used == text.size() && v > 0) return v;
  } catch (const std::exception&) {
  }
  throw Error(std::string(what) + ": expected a positive integer, got \"" + text + "\"");
}

int parse_non_negative(const std::string& text, const char* what) {
  if (text == "0") return 0;
  return parse_positive(text, what);
}

Reply json_reply(int status, const json& body) { return {status, body.dump(), "application/json"}; }

Reply error_reply(int status, const std::string& message, json extra = json::object()) {
  extra["error"] = message;
  return json_reply(status, extra);
}

std::string random_id(const char* prefix) {
  static std::mutex m;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(m);
  return std::string(prefix) + hex64(rng()) + hex64(rng()).substr(0, 8);
}

bool safe_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-') return false;
  return true;
}

json report_json(const ValidationReport& report) {
  json v = json::array();
  for (const auto& x : report) v.push_back({{"field", x.field}, {"rule", x.rule}});
  return v;
}


enum class JobKind { generate, edit };
enum class JobStatus { queued, running, done, failed };

const char* kind_text(JobKind k) { return k == JobKind::generate ? "generate" : "edit"; }
const char* status_text(JobStatus s) {
  switch (s) {
    case JobStatus::queued: return "queued";
    case JobStatus::running: return "running";
    case JobStatus::done: return "done";
    case JobStatus::failed: return "failed";
  }
  return "?";
}

struct Job {
  std::string id;
  std::string session_id;
  JobKind kind = JobKind::generate;
  JobStatus status = JobStatus::queued;
  int completed = 0;
  int total = 0;
  std::string error;
  std::string latent_hash;
  std::string preview_hash;

  bool terminal() const { return status == JobStatus::done || status == JobStatus::failed; }

  json to_json() const {
    json j{{"id", id},
           {"session_id", session_id},
           {"kind", kind_text(kind)},
           {"status", status_text(status)},
           {"progress", {{"completed", completed}, {"total", total}}},
           {"result", nullptr},
           {"error", nullptr}};
    if (status == JobStatus::done)
      j["result"] = {{"latent", latent_hash}, {"preview", preview_hash}, {"preview_url", "/images/" + preview_hash}};
    if (status == JobStatus::failed) j["error"] = error;
    return j;
  }

  static Job from_json(const json& j) {
    Job r;
    r.id = j.at("id").get<std::string>();
    r.session_id = j.at("session_id").get<std::string>();
    r.kind = j.at("kind").get<std::string>() == "edit" ? JobKind::edit : JobKind::generate;
    const auto s = j.at("status").get<std::string>();
    r.status = s == "done" ? JobStatus::done : s == "failed" ? JobStatus::failed : JobStatus::queued;
    r.completed = j.at("progress").at("completed").get<int>();
    r.total = j.at("progress").at("total").get<int>();
    if (r.status == JobStatus::done) {
      r.latent_hash = j.at("result").at("latent").get<std::string>();
      r.preview_hash = j.at("result").at("preview").get<std::string>();
    }
    if (r.status == JobStatus::failed) r.error = j.at("error").get<std::string>();
    if (!r.terminal()) {
      r.status = JobStatus::failed;
      r.error = "service restarted before the job finished";
    }
    return r;
  }
};

struct Session {
  std::string id;
  Scene scene;
  std::optional<std::string> latent_hash;
  std::optional<std::string> reference_hash;
  std::optional<std::string> preview_hash;
  std::vector<std::string> jobs;
  bool busy = false;
};

json opt_json(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }
std::optional<std::string> opt_string(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

struct JobRequest {
  JobKind kind = JobKind::generate;
  std::vector<SceneEdit> edits;
  GenerationConfig cfg;
};

}  // namespace

ServiceConfig ServiceConfig::from_json(const json& j) {
  if (!j.is_object()) throw Error("service config: expected a JSON object");
  ServiceConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    const auto& v = it.value();
    auto need_int = [&](int min) {
      if (!v.is_number_integer() || v.get<long long>() < min)
        throw Error("service config: \"" + k + "\" must be an integer >= " + std::to_string(min));
      return v.get<int>();
    };
    auto need_string = [&] {
      if (!v.is_string()) throw Error("service config: \"" + k + "\" must be a string");
      return v.get<std::string>();
    };
    if (k == "listen") c.listen = need_string();
    else if (k == "data_dir") c.data_dir = need_string();
    else if (k == "backend") c.backend = need_string();
    else if (k == "latent_channels") c.latent_channels = need_int(1);
    else if (k == "default_steps") c.default_steps = need_int(1);
    else if (k == "toy_latency_ms") c.toy_latency_ms = need_int(0);
    else throw Error("service config: unknown key \"" + k + "\"");
  }
  return c;
}

void ServiceConfig::apply_env(const std::function<const char*(const char*)>& getenv) {
  if (const char* v = getenv("POCI_LISTEN")) listen = v;
  if (const char* v = getenv("POCI_DATA_DIR")) data_dir = v;
  if (const char* v = getenv("POCI_BACKEND")) backend = v;
  if (const char* v = getenv("POCI_LATENT_CHANNELS")) latent_channels = parse_positive(v, "POCI_LATENT_CHANNELS");
  if (const char* v = getenv("POCI_DEFAULT_STEPS")) default_steps = parse_positive(v, "POCI_DEFAULT_STEPS");
  if (const char* v = getenv("POCI_TOY_LATENCY_MS")) toy_latency_ms = parse_non_negative(v, "POCI_TOY_LATENCY_MS");
}

ServiceConfig load_service_config(const std::optional<fs::path>& file,
                                  const std::function<const char*(const char*)>& getenv) {
  ServiceConfig c;
  if (file) {
    auto bytes = read_file(*file);
    if (!bytes) throw Error("service config: cannot read " + file->string());
    auto doc = json::parse(bytes->begin(), bytes->end(), nullptr, false);
    if (doc.is_discarded()) throw Error("service config: " + file->string() + " is not valid JSON");
    c = ServiceConfig::from_json(doc);
  }
  c.apply_env(getenv);
  if (c.backend != "toy") Endpoint::parse(c.backend);
  return c;
}

struct SessionService::Impl {
  ServiceConfig config;
  ContentStore objects;
  fs::path sessions_dir;
  std::shared_ptr<ReferenceStore> references = std::make_shared<ReferenceStore>();

  std::mutex mutex;
  std::condition_variable idle_cv;
  std::map<std::string, Session> sessions;
  std::map<std::string, std::shared_ptr<Job>> jobs;
  std::map<std::string, std::string> preview_cache;  // scene document + kind -> object hash
  int active_jobs = 0;
  std::vector<std::thread> workers;

  httplib::Server http;
  std::thread server_thread;

  explicit Impl(ServiceConfig c)
      : config(std::move(c)), objects(config.data_dir / "objects"), sessions_dir(config.data_dir / "sessions") {
    fs::create_directories(sessions_dir);
    load_sessions();
    routes();
  }

  ~Impl() {
    http.stop();
    if (server_thread.joinable()) server_thread.join();
    for (auto& w : workers)
      if (w.joinable()) w.join();
  }

  // persistence

  void load_sessions() {
    for (const auto& entry : fs::directory_iterator(sessions_dir)) {
      if (entry.path().extension() != ".json") continue;
      auto bytes = read_file(entry.path());
      if (!bytes) continue;
      auto doc = json::parse(bytes->begin(), bytes->end(), nullptr, false);
      if (doc.is_discarded()) throw Error("corrupt session file " + entry.path().string());
      Session s;
      s.id = doc.at("id").get<std::string>();
      s.scene = scene_from_json(doc.at("scene")).scene;
      s.latent_hash = opt_string(doc, "latent");
      s.reference_hash = opt_string(doc, "reference");
      s.preview_hash = opt_string(doc, "preview");
      for (const auto& jj : doc.at("jobs")) {
        auto job = std::make_shared<Job>(Job::from_json(jj));
        s.jobs.push_back(job->id);
        jobs[job->id] = job;
      }
      sessions[s.id] = std::move(s);
    }
  }

  // caller holds `mutex`
  void persist(const Session& s) {
    json job_list = json::array();
    for (const auto& id : s.jobs) job_list.push_back(jobs.at(id)->to_json());
    json doc{{"id", s.id},
             {"scene", scene_to_json(s.scene)},
             {"latent", opt_json(s.latent_hash)},
             {"reference", opt_json(s.reference_hash)},
             {"preview", opt_json(s.preview_hash)},
             {"jobs", job_list}};
    write_file_atomic(sessions_dir / (s.id + ".json"), doc.dump(2) + "\n");
  }

  LatentTensor load_snapshot(const std::string& hash) {
    auto bytes = objects.get(hash);
    if (!bytes) throw Error("missing stored latent " + hash);
    return load_latent(*bytes);
  }

  // requests

  Reply create_session(const std::string& body) {
    auto doc = json::parse(body, nullptr, false);
    if (doc.is_discarded()) return error_reply(422, "layout is not valid JSON");
    LoadedLayout layout;
    try {
      layout = scene_from_json(doc);
    } catch (const ParseError& e) {
      return error_reply(422, e.what());
    }
    if (auto report = validate_scene(layout.scene); !report.empty())
      return error_reply(422, "invalid layout: " + format_report(report), {{"violations", report_json(report)}});
    try {
      latent_shape(layout.scene.camera, config.latent_channels);
    } catch (const ShapeError& e) {
      return error_reply(422, e.what());
    }
    Session s;
    s.id = random_id("s-");
    s.scene = std::move(layout.scene);
    std::lock_guard lock(mutex);
    persist(s);
    const auto id = s.id;
    sessions[id] = std::move(s);
    return json_reply(201, {{"id", id}, {"warnings", layout.warnings}});
  }

  json session_json(const Session& s) {
    json j{{"id", s.id},
           {"scene", scene_to_json(s.scene)},
           {"latent", opt_json(s.latent_hash)},
           {"reference", opt_json(s.reference_hash)},
           {"preview", opt_json(s.preview_hash)},
           {"jobs", s.jobs},
           {"busy", s.busy}};
    const auto shape = latent_shape(s.scene.camera, config.latent_channels);
    j["latent_shape"] = {shape.channels, shape.height, shape.width};
    return j;
  }

  Reply get_session(const std::string& id) {
    std::lock_guard lock(mutex);
    auto it = sessions.find(id);
    if (it == sessions.end()) return error_reply(404, "unknown session \"" + id + "\"");
    return json_reply(200, session_json(it->second));
  }

  Reply preview(const std::string& id, const std::string& kind) {
    Scene scene;
    {
      std::lock_guard lock(mutex);
      auto it = sessions.find(id);
      if (it == sessions.end()) return error_reply(404, "unknown session \"" + id + "\"");
      scene = it->second.scene;
    }
    if (kind != "depth" && kind != "masks") return error_reply(400, "kind must be depth or masks");
    const auto key = kind + "\n" + scene_to_json(scene).dump();
    {
      std::lock_guard lock(mutex);
      if (auto it = preview_cache.find(key); it != preview_cache.end())
        if (auto bytes = objects.get(it->second)) return {200, std::string(bytes->begin(), bytes->end()), "image/png"};
    }
    const auto png = kind == "depth" ? export_depth(render_depth(scene)) : export_masks(render_masks(scene));
    const auto hash = objects.put(png);
    std::lock_guard lock(mutex);
    preview_cache[key] = hash;
    return {200, std::string(png.begin(), png.end()), "image/png"};
  }

  std::variant<JobRequest, Reply> parse_job(const std::string& body) {
    auto doc = json::parse(body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) return error_reply(422, "job request must be a JSON object");
    JobRequest r;
    r.cfg.steps = config.default_steps;
    r.cfg.latent_channels = config.latent_channels;
    try {
      if (!doc.contains("kind") || !doc["kind"].is_string()) throw ParseError("kind must be \"generate\" or \"edit\"");
      const auto kind = doc["kind"].get<std::string>();
      if (kind == "edit") {
        r.kind = JobKind::edit;
        if (!doc.contains("edits")) throw ParseError("edit jobs need an \"edits\" array");
        std::vector<std::string> warnings;
        r.edits = edits_from_json(doc["edits"], warnings);
        if (r.edits.empty()) throw ParseError("edits must be non-empty");
      } else if (kind != "generate") {
        throw ParseError("kind must be \"generate\" or \"edit\"");
      }
      if (doc.contains("config")) {
        const auto& c = doc["config"];
        if (!c.is_object()) throw ParseError("config must be an object");
        for (auto it = c.begin(); it != c.end(); ++it) {
          const auto& k = it.key();
          const auto& v = it.value();
          if (k == "steps" && v.is_number_integer() && v.get<long long>() >= 1 && v.get<long long>() <= 10000)
            r.cfg.steps = v.get<int>();
          else if (k == "seed" && v.is_number_integer() && v.get<long long>() >= 0)
            r.cfg.seed = v.get<std::uint64_t>();
          else if (k == "seed" && v.is_number_unsigned())
            r.cfg.seed = v.get<std::uint64_t>();
          else if (k == "mode" && v.is_string() && (v == "parallel" || v == "sequential"))
            r.cfg.mode = v == "parallel" ? ExecutionMode::parallel : ExecutionMode::sequential;
          else if (k == "two_stage" && v.is_boolean())
            r.cfg.two_stage = v.get<bool>();
          else if (k == "use_background_path" && v.is_boolean())
            r.cfg.use_background_path = v.get<bool>();
          else if (k == "guidance" && v.is_number() && v.get<double>() >= 0)
            r.cfg.guidance = v.get<double>();
          else
            throw ParseError("config." + k + ": unknown key or bad value");
        }
      }
    } catch (const ParseError& e) {
      return error_reply(422, e.what());
    }
    return r;
  }

  std::unique_ptr<Denoiser> make_denoiser(int steps, const std::string& job_id) {
    if (config.backend == "toy") {
      ToyOptions opts;
      opts.dispatch_latency = std::chrono::milliseconds(config.toy_latency_ms);
      return std::make_unique<ToyDenoiser>(ToySchedule::constant(steps, 0.25), references, opts);
    }
    return RemoteDenoiser::connect(Endpoint::parse(config.backend), config.latent_channels, references,
                                   {kDefaultStepTimeout, job_id});
  }

  Reply submit_job(const std::string& session_id, const std::string& body) {
    auto parsed = parse_job(body);
    if (auto* r = std::get_if<Reply>(&parsed)) {
      std::lock_guard lock(mutex);
      if (!sessions.count(session_id)) return error_reply(404, "unknown session \"" + session_id + "\"");
      return *r;
    }
    auto req = std::get<JobRequest>(std::move(parsed));

    Scene old_scene, new_scene;
    std::optional<std::string> latent_hash, reference_hash;
    auto job = std::make_shared<Job>();
    job->id = random_id("j-");
    job->session_id = session_id;
    job->kind = req.kind;
    job->total = req.cfg.steps * (req.kind == JobKind::generate && req.cfg.two_stage ? 2 : 1);
    {
      std::lock_guard lock(mutex);
      auto it = sessions.find(session_id);
      if (it == sessions.end()) return error_reply(404, "unknown session \"" + session_id + "\"");
      Session& s = it->second;
      if (s.busy) return error_reply(409, "another job is running on session " + session_id);
      if (req.kind == JobKind::edit && !s.latent_hash)
        return error_reply(412, "edit requires a prior generate on session " + session_id);
      old_scene = s.scene;
      new_scene = s.scene;
      if (req.kind == JobKind::edit) {
        try {
          new_scene = apply_edits(s.scene, req.edits);
        } catch (const EditError& e) {
          return error_reply(422, std::string("invalid edits: ") + e.what());
        }
        if (auto report = validate_scene(new_scene); !report.empty())
          return error_reply(422, "invalid edits: " + format_report(report), {{"violations", report_json(report)}});
        try {
          latent_shape(new_scene.camera, config.latent_channels);
        } catch (const ShapeError& e) {
          return error_reply(422, std::string("invalid edits: ") + e.what());
        }
      }
      latent_hash = s.latent_hash;
      reference_hash = s.reference_hash;
      s.busy = true;  // reserve before the backend probe so a concurrent submit sees 409
    }

    std::unique_ptr<Denoiser> denoiser;
    try {
      denoiser = make_denoiser(req.cfg.steps, job->id);
    } catch (const Error& e) {
      std::lock_guard lock(mutex);
      sessions.at(session_id).busy = false;
      idle_cv.notify_all();
      return error_reply(503, std::string("backend unavailable: ") + e.what());
    }

    {
      std::lock_guard lock(mutex);
      Session& s = sessions.at(session_id);
      jobs[job->id] = job;
      s.jobs.push_back(job->id);
      try {
        persist(s);
      } catch (const std::exception& e) {
        s.jobs.pop_back();
        jobs.erase(job->id);
        s.busy = false;
        return error_reply(500, std::string("cannot persist job: ") + e.what());
      }
      ++active_jobs;
      workers.emplace_back([this, job, req = std::move(req), old_scene = std::move(old_scene),
                            new_scene = std::move(new_scene), latent_hash, reference_hash,
                            denoiser = std::shared_ptr<Denoiser>(std::move(denoiser))]() mutable {
        run_job(job, req, old_scene, new_scene, latent_hash, reference_hash, *denoiser);
      });
    }
    return json_reply(202, {{"job_id", job->id}, {"status", "queued"}, {"url", "/jobs/" + job->id}});
  }

  void run_job(const std::shared_ptr<Job>& job, JobRequest& req, const Scene& old_scene, const Scene& new_scene,
               const std::optional<std::string>& latent_hash, const std::optional<std::string>& reference_hash,
               Denoiser& denoiser) {
    {
      std::lock_guard lock(mutex);
      job->status = JobStatus::running;
    }
    const int steps = req.cfg.steps;
    req.cfg.on_progress = [&](const Progress& p) {
      const int done = (p.stage == "reference" ? 0 : job->total - steps) + p.step;
      std::lock_guard lock(mutex);
      job->completed = std::max(job->completed, done);
    };
    std::string error;
    std::optional<std::string> new_latent, new_reference, new_preview;
    try {
      Orchestrator orch(denoiser, references);
      LatentTensor latent;
      std::optional<LatentTensor> reference;
      if (job->kind == JobKind::generate) {
        auto result = orch.generate_scene(new_scene, req.cfg);
        latent = std::move(result.latent);
        reference = std::move(result.reference);
      } else {
        const auto z_img = load_snapshot(*latent_hash);
        std::optional<LatentTensor> ref_src;
        if (reference_hash && *reference_hash != *latent_hash) {
          auto r = load_snapshot(*reference_hash);
          if (r.shape() == z_img.shape()) ref_src = std::move(r);
        }
        latent = orch.apply_change(old_scene, new_scene, z_img, req.cfg, ref_src);
      }
      new_latent = objects.put(save_latent(latent));
      new_reference = reference ? objects.put(save_latent(*reference)) : *new_latent;
      new_preview = objects.put(decode_preview(latent));
    } catch (const std::exception& e) {
      error = e.what();
    }

    std::lock_guard lock(mutex);
    Session& s = sessions.at(job->session_id);
    if (error.empty()) {
      const Session before = s;
      s.scene = new_scene;
      s.latent_hash = new_latent;
      s.reference_hash = new_reference;
      s.preview_hash = new_preview;
      job->status = JobStatus::done;
      job->completed = job->total;
      job->latent_hash = *new_latent;
      job->preview_hash = *new_preview;
      try {
        persist(s);
      } catch (const std::exception& e) {
        s = before;
        error = std::string("cannot persist session: ") + e.what();
      }
    }
    if (!error.empty()) {
      job->status = JobStatus::failed;
      job->error = error;
      job->latent_hash.clear();
      job->preview_hash.clear();
      try {
        persist(s);
      } catch (const std::exception&) {
      }
    }
    s.busy = false;
    --active_jobs;
    idle_cv.notify_all();
  }

  Reply get_job(const std::string& id) {
    std::lock_guard lock(mutex);
    auto it = jobs.find(id);
    if (it == jobs.end()) return error_reply(404, "unknown job \"" + id + "\"");
    return json_reply(200, it->second->to_json());
  }

  Reply get_image(const std::string& hash) {
    auto bytes = objects.get(hash);
    if (!bytes) return error_reply(404, "unknown image \"" + hash + "\"");
    static constexpr std::uint8_t png_magic[] = {0x89, 'P', 'N', 'G'};
    const bool is_png = bytes->size() >= 4 && std::equal(png_magic, png_magic + 4, bytes->begin());
    return {200, std::string(bytes->begin(), bytes->end()), is_png ? "image/png" : "application/octet-stream"};
  }

  void wait_idle() {
    std::unique_lock lock(mutex);
    idle_cv.wait(lock, [&] { return active_jobs == 0; });
  }

  // HTTP

  static void send(httplib::Response& res, const Reply& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  }

  void routes() {
    http.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, create_session(req.body));
    });
    http.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, get_session(req.matches[1]));
    });
    http.Get(R"(/sessions/([^/]+)/preview)", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, preview(req.matches[1], req.has_param("kind") ? req.get_param_value("kind") : ""));
    });
    http.Post(R"(/sessions/([^/]+)/jobs)", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, submit_job(req.matches[1], req.body));
    });
    http.Get(R"(/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, get_job(req.matches[1]));
    });
    http.Get(R"(/images/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, get_image(req.matches[1]));
    });
    http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string msg = "internal error";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        msg = e.what();
      } catch (...) {
      }
      send(res, error_reply(500, msg));
    });
  }
};

SessionService::SessionService(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}
SessionService::~SessionService() = default;

const ServiceConfig& SessionService::config() const { return impl_->config; }

Reply SessionService::create_session(const std::string& body) { return impl_->create_session(body); }
Reply SessionService::get_session(const std::string& id) {
  if (!safe_id(id)) return error_reply(404, "unknown session");
  return impl_->get_session(id);
}
Reply SessionService::preview(const std::string& id, const std::string& kind) {
  if (!safe_id(id)) return error_reply(404, "unknown session");
  return impl_->preview(id, kind);
}
Reply SessionService::submit_job(const std::string& session_id, const std::string& body) {
  if (!safe_id(session_id)) return error_reply(404, "unknown session");
  return impl_->submit_job(session_id, body);
}
Reply SessionService::get_job(const std::string& id) {
  if (!safe_id(id)) return error_reply(404, "unknown job");
  return impl_->get_job(id);
}
Reply SessionService::get_image(const std::string& hash) { return impl_->get_image(hash); }

void SessionService::wait_idle() { impl_->wait_idle(); }

int SessionService::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->http.bind_to_any_port(host);
  } else if (!impl_->http.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound <= 0) throw Error("session service: cannot bind " + host + ":" + std::to_string(port));
  impl_->server_thread = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
  return bound;
}

void SessionService::join() {
  if (impl_->server_thread.joinable()) impl_->server_thread.join();
}

void SessionService::stop() {
  impl_->http.stop();
  if (impl_->server_thread.joinable()) impl_->server_thread.join();
}

}  // namespace poci::net
