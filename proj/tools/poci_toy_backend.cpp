// Reference step server: the toy denoiser behind the remote denoiser protocol.

#include <iostream>

#include "CLI11.hpp"
#include "poci/net/gateway.hpp"
#include "poci/toy_denoiser.hpp"

int main(int argc, char** argv) {
  CLI::App app{"poci toy step server"};
  std::string listen = "127.0.0.1:8090";
  int steps = 50;
  double alpha = 0.25;
  int channels = 4;
  int max_batch = 64;
  int latency_ms = 0;
  app.add_option("--listen", listen, "host:port (port 0 picks a free port)");
  app.add_option("--steps", steps, "schedule length")->check(CLI::PositiveNumber);
  app.add_option("--alpha", alpha, "per-step contraction")->check(CLI::Range(1e-9, 1.0));
  app.add_option("--channels", channels, "latent channels advertised by /v1/health")->check(CLI::PositiveNumber);
  app.add_option("--max-batch", max_batch, "largest accepted batch")->check(CLI::PositiveNumber);
  app.add_option("--latency-ms", latency_ms, "sleep per dispatch")->check(CLI::NonNegativeNumber);
  CLI11_PARSE(app, argc, argv);

  try {
    const auto ep = poci::net::Endpoint::parse_listen(listen.find(':') == std::string::npos ? listen + ":0" : listen);
    auto refs = std::make_shared<poci::ReferenceStore>();
    poci::ToyOptions opts;
    opts.dispatch_latency = std::chrono::milliseconds(latency_ms);
    poci::ToyDenoiser toy(poci::ToySchedule::constant(steps, alpha), refs, opts);
    poci::net::StepServer server(toy, {"toy", channels, max_batch}, refs);
    const int port = server.start(ep.host, ep.port);
    std::cout << "listening on http://" << ep.host << ":" << port << std::endl;
    server.join();
  } catch (const std::exception& e) {
    std::cerr << "poci_toy_backend: " << e.what() << "\n";
    return 1;
  }
}
