// HTTP session service for the layout editor and scripted clients.

#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"
#include "poci/net/gateway.hpp"
#include "poci/net/service.hpp"

int main(int argc, char** argv) {
  CLI::App app{"poci session service"};
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; POCI_* environment variables override it");
  CLI11_PARSE(app, argc, argv);

  try {
    std::optional<std::filesystem::path> file;
    if (!config_path.empty()) file = config_path;
    const auto config = poci::net::load_service_config(file, [](const char* k) { return std::getenv(k); });
    const auto listen = poci::net::Endpoint::parse_listen(config.listen);
    poci::net::SessionService service(config);
    const int port = service.start(listen.host, listen.port);
    // the first line is machine-read by scripts that bind port 0
    std::cout << "listening on http://" << listen.host << ":" << port << std::endl;
    std::cout << "data " << config.data_dir.string() << ", backend " << config.backend << std::endl;
    service.join();
  } catch (const std::exception& e) {
    std::cerr << "poci_server: " << e.what() << "\n";
    return 1;
  }
}
