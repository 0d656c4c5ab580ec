// Batch entry points: render, curate, generate, edit, bench.
//
// Exit codes: 0 ok, 1 other failure, 2 file not found, 3 invalid input, 4 nothing to curate.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "poci/bench.hpp"
#include "poci/curate.hpp"
#include "poci/layout_io.hpp"
#include "poci/net/gateway.hpp"
#include "poci/orchestrator.hpp"
#include "poci/toy_denoiser.hpp"

namespace fs = std::filesystem;

namespace {

struct Exit {
  int code;
  std::string message;
};

struct Globals {
  std::string config_path;
  std::uint64_t seed = 0;
  int steps = 50;
  std::string backend = "toy";
  int channels = poci::kDefaultLatentChannels;
  std::string mode = "parallel";
};

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Exit{2, p.string() + ": file not found"};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  const auto s = read_text(p);
  return {s.begin(), s.end()};
}

void write_bytes(const fs::path& p, std::span<const std::uint8_t> bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Exit{1, p.string() + ": cannot write"};
}

poci::Scene load_scene(const fs::path& p) {
  const auto text = read_text(p);
  poci::LoadedLayout layout;
  try {
    layout = poci::load_layout(text);
  } catch (const poci::ParseError& e) {
    throw Exit{3, p.string() + ": " + e.what()};
  }
  for (const auto& w : layout.warnings) std::cerr << p.string() << ": warning: " << w << "\n";
  if (auto report = poci::validate_scene(layout.scene); !report.empty())
    throw Exit{3, p.string() + ": invalid layout: " + poci::format_report(report)};
  return layout.scene;
}

poci::ExecutionMode parse_mode(const std::string& m) {
  if (m == "parallel") return poci::ExecutionMode::parallel;
  if (m == "sequential") return poci::ExecutionMode::sequential;
  throw Exit{3, "mode must be parallel or sequential"};
}

// Config file keys: seed, steps, backend, latent_channels, mode. Flags given on the command
// line win.
void apply_config(Globals& g, const CLI::App& app) {
  if (g.config_path.empty()) return;
  auto doc = nlohmann::json::parse(read_text(g.config_path), nullptr, false);
  if (!doc.is_object()) throw Exit{3, g.config_path + ": config must be a JSON object"};
  try {
    for (auto it = doc.begin(); it != doc.end(); ++it) {
      const auto& k = it.key();
      if (k == "seed") {
        if (!app.count("--seed")) g.seed = it->get<std::uint64_t>();
      } else if (k == "steps") {
        if (!app.count("--steps")) g.steps = it->get<int>();
      } else if (k == "backend") {
        if (!app.count("--backend")) g.backend = it->get<std::string>();
      } else if (k == "latent_channels") {
        if (!app.count("--channels")) g.channels = it->get<int>();
      } else if (k == "mode") {
        if (!app.count("--mode")) g.mode = it->get<std::string>();
      } else {
        throw Exit{3, g.config_path + ": unknown key \"" + k + "\""};
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Exit{3, g.config_path + ": " + e.what()};
  }
  if (g.steps < 1) throw Exit{3, "steps must be at least 1"};
}

struct Backend {
  std::shared_ptr<poci::ReferenceStore> references = std::make_shared<poci::ReferenceStore>();
  std::unique_ptr<poci::Denoiser> denoiser;
};

// The remote backend's schedule must cover --steps timesteps.
Backend make_backend(const Globals& g) {
  Backend b;
  if (g.backend == "toy") {
    b.denoiser = std::make_unique<poci::ToyDenoiser>(poci::ToySchedule::constant(g.steps, 0.25), b.references);
  } else {
    b.denoiser = poci::net::RemoteDenoiser::connect(poci::net::Endpoint::parse(g.backend), g.channels, b.references,
                                                    {poci::net::kDefaultStepTimeout, "cli"});
  }
  return b;
}

poci::GenerationConfig generation_config(const Globals& g) {
  poci::GenerationConfig cfg;
  cfg.steps = g.steps;
  cfg.seed = g.seed;
  cfg.mode = parse_mode(g.mode);
  cfg.latent_channels = g.channels;
  return cfg;
}

void write_result(const fs::path& out, const poci::LatentTensor& latent) {
  fs::create_directories(out);
  write_bytes(out / "latent.plat", poci::save_latent(latent));
  write_bytes(out / "preview.png", poci::decode_preview(latent));
  std::cout << "latent " << poci::latent_key(latent) << " -> " << (out / "latent.plat").string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"poci: layout-guided latent generation tools"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "JSON defaults for seed, steps, backend, latent_channels, mode");
  app.add_option("--seed", g.seed, "noise seed");
  app.add_option("--steps", g.steps, "denoising steps")->check(CLI::PositiveNumber);
  app.add_option("--backend", g.backend, "toy (in-process) or a step server URL");
  app.add_option("--channels", g.channels, "latent channels")->check(CLI::PositiveNumber);
  app.add_option("--mode", g.mode, "parallel or sequential");

  std::string layout_path, out_dir;
  auto* render = app.add_subcommand("render", "write depth.png and masks.png for a layout");
  render->add_option("layout", layout_path)->required();
  render->add_option("-o,--out", out_dir, "output directory")->required();

  std::string in_dir;
  auto* curate = app.add_subcommand("curate", "lift annotated depth maps into layouts and fit cameras");
  curate->add_option("input", in_dir, "directory of <name>.png + <name>.json pairs")->required();
  curate->add_option("-o,--out", out_dir, "output directory")->required();

  bool two_stage = false, no_background = false;
  auto* generate = app.add_subcommand("generate", "generate a latent for a layout");
  generate->add_option("layout", layout_path)->required();
  generate->add_option("-o,--out", out_dir, "output directory")->required();
  generate->add_flag("--two-stage", two_stage, "first pass produces an identity reference");
  generate->add_flag("--no-background", no_background, "disable the background path");

  std::string latent_path, edits_path, reference_path;
  auto* edit = app.add_subcommand("edit", "apply scene edits to a generated latent");
  edit->add_option("layout", layout_path, "layout the latent was generated from")->required();
  edit->add_option("latent", latent_path, "latent snapshot")->required();
  edit->add_option("-e,--edits", edits_path, "JSON array of scene edits")->required();
  edit->add_option("-r,--reference", reference_path, "identity reference snapshot (defaults to the latent)");
  edit->add_option("-o,--out", out_dir, "output directory")->required();

  std::vector<int> sizes{2, 8};
  std::string bench_modes = "both", bench_json;
  int image_size = 512, latency_us = 2000;
  auto* bench = app.add_subcommand("bench", "time generation against object count");
  bench->add_option("--sizes", sizes, "object counts, strictly increasing")->delimiter(',');
  bench->add_option("--modes", bench_modes, "parallel, sequential or both");
  bench->add_option("--image-size", image_size, "image width and height")->check(CLI::PositiveNumber);
  bench->add_option("--latency-us", latency_us, "toy dispatch latency")->check(CLI::NonNegativeNumber);
  bench->add_option("--json", bench_json, "write the report here");

  CLI11_PARSE(app, argc, argv);

  try {
    apply_config(g, app);

    if (*render) {
      const auto scene = load_scene(layout_path);
      const auto r = poci::render_layout(scene);
      fs::create_directories(out_dir);
      write_bytes(fs::path(out_dir) / "depth.png", poci::export_depth(r.depth));
      write_bytes(fs::path(out_dir) / "masks.png", poci::export_masks(r.masks));
      std::cout << "wrote " << (fs::path(out_dir) / "depth.png").string() << ", "
                << (fs::path(out_dir) / "masks.png").string() << "\n";
      return 0;
    }

    if (*curate) {
      if (!fs::is_directory(in_dir)) throw Exit{2, in_dir + ": file not found"};
      poci::CurateOptions opts;
      opts.fit.seed = g.seed;
      const auto outcomes = poci::curate_dir(in_dir, out_dir, opts, std::cout);
      if (outcomes.empty()) throw Exit{4, in_dir + ": no annotated scenes"};
      const auto ok = std::count_if(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.ok; });
      std::cout << ok << "/" << outcomes.size() << " scenes curated\n";
      return ok == 0 ? 4 : 0;
    }

    if (*generate) {
      const auto scene = load_scene(layout_path);
      auto backend = make_backend(g);
      poci::Orchestrator orch(*backend.denoiser, backend.references);
      auto cfg = generation_config(g);
      cfg.two_stage = two_stage;
      cfg.use_background_path = !no_background;
      auto result = orch.generate_scene(scene, cfg);
      write_result(out_dir, result.latent);
      if (result.reference) write_bytes(fs::path(out_dir) / "reference.plat", poci::save_latent(*result.reference));
      return 0;
    }

    if (*edit) {
      const auto scene = load_scene(layout_path);
      const auto z_img = poci::load_latent(read_bytes(latent_path));
      std::optional<poci::LatentTensor> reference;
      if (!reference_path.empty()) reference = poci::load_latent(read_bytes(reference_path));
      std::vector<poci::SceneEdit> edits;
      poci::Scene target;
      try {
        auto doc = nlohmann::json::parse(read_text(edits_path));
        std::vector<std::string> warnings;
        edits = poci::edits_from_json(doc, warnings);
        for (const auto& w : warnings) std::cerr << edits_path << ": warning: " << w << "\n";
        target = poci::apply_edits(scene, edits);
      } catch (const nlohmann::json::exception& e) {
        throw Exit{3, edits_path + ": " + e.what()};
      } catch (const poci::ParseError& e) {
        throw Exit{3, edits_path + ": " + e.what()};
      } catch (const poci::EditError& e) {
        throw Exit{3, edits_path + ": " + e.what()};
      }
      if (auto report = poci::validate_scene(target); !report.empty())
        throw Exit{3, edits_path + ": edited layout is invalid: " + poci::format_report(report)};
      auto backend = make_backend(g);
      poci::Orchestrator orch(*backend.denoiser, backend.references);
      const auto latent = orch.apply_change(scene, target, z_img, generation_config(g), reference);
      write_result(out_dir, latent);
      std::ofstream(fs::path(out_dir) / "layout.json") << poci::save_layout(target);
      return 0;
    }

    if (*bench) {
      std::vector<poci::ExecutionMode> modes;
      if (bench_modes == "parallel" || bench_modes == "both") modes.push_back(poci::ExecutionMode::parallel);
      if (bench_modes == "sequential" || bench_modes == "both") modes.push_back(poci::ExecutionMode::sequential);
      if (modes.empty()) throw Exit{3, "--modes must be parallel, sequential or both"};
      if (sizes.empty() || !std::is_sorted(sizes.begin(), sizes.end(), std::less_equal<>()) || sizes.front() < 0)
        throw Exit{3, "--sizes must be strictly increasing object counts"};
      poci::BenchOptions opts;
      opts.sizes = sizes;
      opts.steps = g.steps;
      opts.seed = g.seed;
      opts.image_size = image_size;
      opts.dispatch_latency = std::chrono::microseconds(latency_us);
      const auto report = poci::run_bench(opts, modes);
      std::cout << std::left << std::setw(10) << "objects" << std::setw(12) << "mode" << std::setw(12) << "seconds"
                << "peak tensor bytes\n";
      for (const auto& r : report.runs)
        std::cout << std::setw(10) << r.objects << std::setw(12) << poci::mode_name(r.mode) << std::setw(12)
                  << std::fixed << std::setprecision(3) << r.seconds << r.peak_bytes << "\n";
      for (auto mode : modes) {
        const auto* lo = report.find(sizes.front(), mode);
        const auto* hi = report.find(sizes.back(), mode);
        if (lo && hi && lo != hi)
          std::cout << poci::mode_name(mode) << " t(" << hi->objects << ")/t(" << lo->objects
                    << ") = " << std::setprecision(3) << hi->seconds / lo->seconds << "\n";
      }
      if (!bench_json.empty()) std::ofstream(bench_json) << report.to_json().dump(2) << "\n";
      return 0;
    }
  } catch (const Exit& e) {
    std::cerr << "poci: " << e.message << "\n";
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "poci: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
