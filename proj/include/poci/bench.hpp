#pragma once

#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"
#include "poci/orchestrator.hpp"
#include "poci/toy_denoiser.hpp"

namespace poci {

/// n equal boxes on a near-square grid facing a camera at the origin; no box occludes another.
inline Scene grid_scene(int n, int image_size = 512) {
  Scene s;
  s.camera = Camera::with_resolution(image_size, image_size);
  s.camera.fx = s.camera.fy = image_size;
  s.camera.cx = s.camera.cy = image_size / 2.0;
  s.background_prompt = "an empty room";
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
  const int rows = (n + cols - 1) / cols;
  // the view at depth 5 spans [-2.5, 2.5]; each box fills 60% of its grid cell
  const double span = 4.0;
  const double cell_w = span / cols, cell_h = span / rows;
  for (int i = 0; i < n; ++i) {
    const int r = i / cols, c = i % cols;
    OrientedBox b;
    b.id = "obj" + std::to_string(i);
    b.center = {-span / 2 + (c + 0.5) * cell_w, span / 2 - (r + 0.5) * cell_h, 5.0};
    b.size = {0.6 * cell_w, 0.6 * cell_h, 0.2};
    s.objects.push_back({b, "object " + std::to_string(i)});
  }
  return s;
}

struct BenchRun {
  int objects = 0;
  ExecutionMode mode = ExecutionMode::parallel;
  double seconds = 0.0;
  std::int64_t peak_bytes = 0;
  std::string latent_key;
};

struct BenchOptions {
  std::vector<int> sizes{2, 8};
  int steps = 50;
  int image_size = 512;
  std::chrono::microseconds dispatch_latency{2000};
  std::uint64_t seed = 0;
};

/// Times generate_scene on grid scenes with the toy backend. Peak bytes are tracked latent
/// bytes above the live total at the start of each run.
inline BenchRun bench_once(int objects, ExecutionMode mode, const BenchOptions& opts) {
  auto refs = std::make_shared<ReferenceStore>();
  ToyOptions toy_opts;
  toy_opts.dispatch_latency = opts.dispatch_latency;
  ToyDenoiser toy(ToySchedule::constant(opts.steps, 0.25), refs, toy_opts);
  Orchestrator orch(toy, refs);
  GenerationConfig cfg;
  cfg.steps = opts.steps;
  cfg.seed = opts.seed;
  cfg.mode = mode;
  const Scene scene = grid_scene(objects, opts.image_size);

  const auto baseline = TensorTracker::live();
  TensorTracker::reset_peak();
  const auto t0 = std::chrono::steady_clock::now();
  auto result = orch.generate_scene(scene, cfg);
  const auto t1 = std::chrono::steady_clock::now();
  return {objects, mode, std::chrono::duration<double>(t1 - t0).count(), TensorTracker::peak() - baseline,
          latent_key(result.latent)};
}

struct BenchReport {
  std::vector<BenchRun> runs;

  const BenchRun* find(int objects, ExecutionMode mode) const {
    for (const auto& r : runs)
      if (r.objects == objects && r.mode == mode) return &r;
    return nullptr;
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : runs)
      j.push_back({{"objects", r.objects},
                   {"mode", mode_name(r.mode)},
                   {"seconds", r.seconds},
                   {"peak_tensor_bytes", r.peak_bytes},
                   {"latent_key", r.latent_key}});
    return {{"runs", j}};
  }
};

/// Sizes must be strictly increasing.
inline BenchReport run_bench(const BenchOptions& opts, const std::vector<ExecutionMode>& modes) {
  for (std::size_t i = 1; i < opts.sizes.size(); ++i)
    if (opts.sizes[i] <= opts.sizes[i - 1]) throw Error("bench: object counts must be strictly increasing");
  BenchReport report;
  for (auto mode : modes)
    for (int n : opts.sizes) report.runs.push_back(bench_once(n, mode, opts));
  return report;
}

}  // namespace poci
