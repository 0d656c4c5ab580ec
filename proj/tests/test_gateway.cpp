#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "httplib.h"
#include "poci/net/gateway.hpp"
#include "poci/orchestrator.hpp"
#include "poci/toy_denoiser.hpp"
#include "support.hpp"

using namespace poci;
using namespace poci::net;
using namespace poci::testing;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

// Toy backend on loopback plus an in-process twin with its own reference store.
struct Loopback {
  std::shared_ptr<ReferenceStore> server_refs = std::make_shared<ReferenceStore>();
  ToyDenoiser server_toy;
  StepServer server;

  explicit Loopback(ToySchedule schedule = ToySchedule::standard(), int channels = 4, int max_batch = 64,
                    ToyOptions opts = {})
      : server_toy(std::move(schedule), server_refs, opts), server(server_toy, {"toy", channels, max_batch}, server_refs) {
    server.start();
  }
};

// Answers /v1/step with a fixed body.
struct FakeBackend {
  httplib::Server http;
  std::thread thread;
  int port = 0;

  explicit FakeBackend(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    http.Post("/v1/step", handler);
    port = http.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { http.listen_after_bind(); });
    http.wait_until_ready();
  }
  ~FakeBackend() {
    http.stop();
    thread.join();
  }
};

struct FailingDenoiser : Denoiser {
  std::string name() const override { return "failing"; }
  LatentTensor step(const PathStep& call) override {
    throw DenoiserError("out of memory", call.path_id, call.timestep);
  }
};

StepRequest sample_request(Rng& rng) {
  StepRequest r;
  r.job_id = "job-1";
  r.path_id = "object:mug";
  r.timestep = 7;
  r.latent = random_latent(rng, {4, 8, 8});
  r.prompt = "a green mug";
  Scene s;
  s.camera = make_camera(64, 64, 64);
  s.objects.push_back({random_box(rng, "mug"), "a green mug"});
  r.depth_png = export_depth(render_depth(s));
  r.reference_id = "abc:mug";
  r.reference_signature = std::vector<float>{0.25f, -1.5f, 3.0e-8f, -0.0f};
  r.guidance = 5.5;
  r.seed = std::numeric_limits<std::uint64_t>::max();
  return r;
}

}  // namespace

TEST(Base64, KnownVectorsAndRandomRoundTrip) {
  EXPECT_EQ(base64_encode(bytes_of("")), "");
  EXPECT_EQ(base64_encode(bytes_of("f")), "Zg==");
  EXPECT_EQ(base64_encode(bytes_of("fo")), "Zm8=");
  EXPECT_EQ(base64_encode(bytes_of("foobar")), "Zm9vYmFy");
  EXPECT_EQ(base64_decode("Zm8="), bytes_of("fo"));
  EXPECT_THROW(base64_decode("Zm8"), ParseError);
  EXPECT_THROW(base64_decode("Zm#="), ParseError);
  Rng rng(1);
  for (int n = 0; n < 64; ++n) {
    std::vector<std::uint8_t> v(static_cast<std::size_t>(n));
    for (auto& b : v) b = static_cast<std::uint8_t>(uniform_int(rng, 0, 255));
    ASSERT_EQ(base64_decode(base64_encode(v)), v) << n;
  }
}

TEST(Endpoint, ParsesUrlsAndRejectsGarbage) {
  const auto e = Endpoint::parse("http://127.0.0.1:8090/");
  EXPECT_EQ(e.host, "127.0.0.1");
  EXPECT_EQ(e.port, 8090);
  EXPECT_EQ(Endpoint::parse("localhost:80").host, "localhost");
  EXPECT_THROW(Endpoint::parse("localhost"), ParseError);
  EXPECT_THROW(Endpoint::parse("localhost:99999"), ParseError);
  EXPECT_THROW(Endpoint::parse("localhost:80x"), ParseError);
}

TEST(WireCodec, StepRequestRoundTripsBitExact) {
  Rng rng(2);
  const auto r = sample_request(rng);
  const auto back = step_request_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(back.job_id, r.job_id);
  EXPECT_EQ(back.path_id, r.path_id);
  EXPECT_EQ(back.timestep, r.timestep);
  EXPECT_TRUE(bit_equal(back.latent, r.latent));
  EXPECT_EQ(back.prompt, r.prompt);
  EXPECT_EQ(back.depth_png, r.depth_png);
  EXPECT_EQ(back.reference_id, r.reference_id);
  ASSERT_TRUE(back.reference_signature);
  EXPECT_EQ(std::memcmp(back.reference_signature->data(), r.reference_signature->data(), 16), 0);
  EXPECT_EQ(back.guidance, r.guidance);
  EXPECT_EQ(back.seed, r.seed);
}

TEST(WireCodec, PayloadLengthMustMatchShape) {
  Rng rng(3);
  auto j = to_json(sample_request(rng));
  j["latent"]["shape"] = {4, 8, 7};
  EXPECT_THROW(step_request_from_json(j), ShapeError);
  j["latent"]["shape"] = {4, 8};
  EXPECT_THROW(step_request_from_json(j), ParseError);
  j = to_json(sample_request(rng));
  j.erase("seed");
  EXPECT_THROW(step_request_from_json(j), ParseError);
}

TEST(Health, ToyLoopbackDescriptor) {
  Loopback lb;
  const auto d = health_check(lb.server.endpoint());
  EXPECT_EQ(d.name, "toy");
  EXPECT_EQ(d.channels, 4);
  EXPECT_EQ(d.max_batch, 64);
  EXPECT_NO_THROW(require_channels(d, 4));
}

TEST(Health, ChannelMismatchFailsAtConnect) {
  Loopback lb(ToySchedule::standard(), 8);
  auto refs = std::make_shared<ReferenceStore>();
  EXPECT_THROW(RemoteDenoiser::connect(lb.server.endpoint(), 4, refs, {}), BackendIncompatible);
}

TEST(Health, DeadEndpointIsUnreachable) {
  EXPECT_THROW(health_check({"127.0.0.1", 1}, std::chrono::milliseconds(500)), BackendUnreachable);
}

TEST(RemoteStep, LoopbackMatchesInProcessStep) {
  Loopback lb;
  Rng rng(4);
  auto req = sample_request(rng);
  req.reference_id.reset();
  req.reference_signature.reset();
  const auto responses = remote_step(lb.server.endpoint(), {req});
  ASSERT_EQ(responses.size(), 1u);
  EXPECT_EQ(responses[0].path_id, req.path_id);
  EXPECT_EQ(responses[0].timestep, req.timestep);

  ToyDenoiser local;
  const Conditioning cond{req.prompt, DepthControl::from_png(req.depth_png), std::nullopt, req.guidance};
  const auto expected = local.step({req.path_id, req.timestep, req.latent, cond, req.seed});
  EXPECT_TRUE(bit_equal(responses[0].latent, expected));
}

TEST(RemoteStep, BatchOfThreeEqualsThreeSingles) {
  Loopback lb;
  Rng rng(5);
  std::vector<StepRequest> batch;
  for (int i = 0; i < 3; ++i) {
    auto r = sample_request(rng);
    r.path_id = "object:" + std::to_string(i);
    r.timestep = i;
    r.prompt = "prompt " + std::to_string(i);
    batch.push_back(r);
  }
  const auto together = remote_step(lb.server.endpoint(), batch);
  ASSERT_EQ(together.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    const auto single = remote_step(lb.server.endpoint(), {batch[i]});
    EXPECT_EQ(together[i].path_id, batch[i].path_id);
    EXPECT_TRUE(bit_equal(together[i].latent, single[0].latent)) << i;
  }
}

TEST(RemoteStep, UnreachableEndpointIsTransportError) {
  Rng rng(6);
  const auto req = sample_request(rng);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    remote_step({"127.0.0.1", 1}, {req}, std::chrono::seconds(2));
    FAIL() << "expected a transport error";
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind, GatewayError::Kind::transport);
    EXPECT_EQ(e.path_id, req.path_id);
    EXPECT_EQ(e.timestep, req.timestep);
  }
  EXPECT_LT(std::chrono::steady_clock::now() - t0, std::chrono::seconds(3));
}

TEST(RemoteStep, SlowBackendTimesOut) {
  ToyOptions slow;
  slow.dispatch_latency = std::chrono::milliseconds(1500);
  Loopback lb(ToySchedule::standard(), 4, 64, slow);
  Rng rng(7);
  auto req = sample_request(rng);
  try {
    remote_step(lb.server.endpoint(), {req}, std::chrono::milliseconds(200));
    FAIL() << "expected a timeout";
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind, GatewayError::Kind::timeout);
    EXPECT_EQ(e.path_id, req.path_id);
    EXPECT_EQ(e.timestep, req.timestep);
  }
}

TEST(RemoteStep, BackendFailureCarriesPathAndTimestep) {
  FailingDenoiser failing;
  StepServer server(failing, {"failing", 4, 8}, std::make_shared<ReferenceStore>());
  server.start();
  Rng rng(8);
  auto a = sample_request(rng), b = sample_request(rng);
  b.path_id = "background";
  b.timestep = 3;
  try {
    remote_step(server.endpoint(), {b, a});
    FAIL() << "expected a backend error";
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind, GatewayError::Kind::backend);
    EXPECT_EQ(e.path_id, "background");
    EXPECT_EQ(e.timestep, 3);
    EXPECT_NE(std::string(e.what()).find("out of memory"), std::string::npos);
  }
}

TEST(RemoteStep, MalformedAndMisshapenResponsesAreRejected) {
  Rng rng(9);
  const auto req = sample_request(rng);
  {
    FakeBackend fake([](const httplib::Request&, httplib::Response& res) { res.set_content("not json", "text/plain"); });
    try {
      remote_step({"127.0.0.1", fake.port}, {req});
      FAIL();
    } catch (const GatewayError& e) {
      EXPECT_EQ(e.kind, GatewayError::Kind::malformed);
    }
  }
  {
    FakeBackend fake([](const httplib::Request&, httplib::Response& res) { res.set_content("[]", "application/json"); });
    try {
      remote_step({"127.0.0.1", fake.port}, {req});
      FAIL();
    } catch (const GatewayError& e) {
      EXPECT_EQ(e.kind, GatewayError::Kind::malformed);
    }
  }
  {
    FakeBackend fake([&](const httplib::Request&, httplib::Response& res) {
      StepResponse r{req.path_id, req.timestep, LatentTensor({4, 4, 4})};
      res.set_content(nlohmann::json::array({to_json(r)}).dump(), "application/json");
    });
    try {
      remote_step({"127.0.0.1", fake.port}, {req});
      FAIL();
    } catch (const GatewayError& e) {
      EXPECT_EQ(e.kind, GatewayError::Kind::shape);
      EXPECT_EQ(e.path_id, req.path_id);
    }
  }
}

TEST(StepServerRoutes, RejectsBadBodiesAndOversizedBatches) {
  Loopback lb(ToySchedule::standard(), 4, 2);
  httplib::Client cli(lb.server.endpoint().host, lb.server.endpoint().port);
  auto res = cli.Post("/v1/step", "{}", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  Rng rng(10);
  auto r = to_json(sample_request(rng));
  res = cli.Post("/v1/step", nlohmann::json::array({r, r, r}).dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 413);
}

TEST(RemoteDenoiserTest, ChunksBatchesByMaxBatch) {
  Loopback lb(ToySchedule::standard(), 4, 2);
  auto refs = std::make_shared<ReferenceStore>();
  auto remote = RemoteDenoiser::connect(lb.server.endpoint(), 4, refs, {});
  EXPECT_EQ(remote->max_batch(), 2);
  Rng rng(11);
  const auto z = random_latent(rng, {4, 8, 8});
  const Conditioning cond{"p", nullptr, std::nullopt, 7.5};
  std::vector<PathStep> calls;
  for (int i = 0; i < 5; ++i) calls.push_back({"p" + std::to_string(i), 0, z, cond, 0});
  const auto out = remote->step_batch(calls);
  ASSERT_EQ(out.size(), 5u);
  ToyDenoiser local;
  for (const auto& o : out) EXPECT_TRUE(bit_equal(o, local.step(calls[0])));
}

TEST(Transparency, OrchestratorOverLoopbackIsBitIdentical) {
  Loopback lb(ToySchedule::constant(8, 0.25));
  Rng rng(12);
  for (int trial = 0; trial < 3; ++trial) {
    const auto scene = random_scene(rng, 64, 64, 1, 3);
    GenerationConfig cfg;
    cfg.steps = 8;
    cfg.seed = rng();
    cfg.two_stage = trial == 1;

    auto local_refs = std::make_shared<ReferenceStore>();
    ToyDenoiser local(ToySchedule::constant(8, 0.25), local_refs);
    const auto expected = Orchestrator(local, local_refs).generate_scene(scene, cfg).latent;

    auto client_refs = std::make_shared<ReferenceStore>();
    auto remote = RemoteDenoiser::connect(lb.server.endpoint(), 4, client_refs, {});
    const auto got = Orchestrator(*remote, client_refs).generate_scene(scene, cfg).latent;
    EXPECT_TRUE(bit_equal(got, expected)) << "trial " << trial;
  }
}

TEST(Transparency, EditWithReferenceOverLoopback) {
  Loopback lb(ToySchedule::constant(8, 0.25));
  Rng rng(13);
  auto scene = random_scene(rng, 64, 64, 2, 2);
  GenerationConfig cfg;
  cfg.steps = 8;
  const auto z_img = random_latent(rng, latent_shape(scene.camera));
  auto moved = scene;
  moved.objects[0].box.center.x += 0.7;

  auto local_refs = std::make_shared<ReferenceStore>();
  ToyDenoiser local(ToySchedule::constant(8, 0.25), local_refs);
  const auto expected = Orchestrator(local, local_refs).edit_apply(scene, moved, z_img, cfg);

  auto client_refs = std::make_shared<ReferenceStore>();
  auto remote = RemoteDenoiser::connect(lb.server.endpoint(), 4, client_refs, {});
  const auto got = Orchestrator(*remote, client_refs).edit_apply(scene, moved, z_img, cfg);
  EXPECT_TRUE(bit_equal(got, expected));
  EXPECT_GT(lb.server_refs->size(), 0u);
}
