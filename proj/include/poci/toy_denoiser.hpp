#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <future>
#include <memory>
#include <numeric>
#include <thread>
#include <vector>

#include "poci/denoiser.hpp"
#include "poci/hash.hpp"
#include "poci/png_io.hpp"

namespace poci {

/// Per-step contraction rates alpha_t in (0, 1].
struct ToySchedule {
  std::vector<double> alphas;

  static ToySchedule constant(int steps, double alpha) {
    return {std::vector<double>(static_cast<std::size_t>(steps), alpha)};
  }
  // 0.75^50 ~ 5.7e-7
  static ToySchedule standard() { return constant(50, 0.25); }

  int steps() const { return static_cast<int>(alphas.size()); }
  double residual() const {
    double r = 1.0;
    for (double a : alphas) r *= 1.0 - a;
    return r;
  }
};

inline constexpr double kToyDepthWeight = 0.1;
inline constexpr double kToyReferenceMix = 0.5;

/// Per-channel base value of a prompt, in [-1, 1).
inline double toy_prompt_base(const std::string& prompt, int channel) {
  const std::uint64_t h = splitmix64(fnv1a64(prompt) ^ (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(channel + 1)));
  return static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;
}

struct ToyOptions {
  // fixed cost of one backend dispatch (one step or one batch); models per-call overhead
  std::chrono::microseconds dispatch_latency{0};
  bool concurrent_batches = true;
};

/// Deterministic stand-in for a diffusion backend. Each step moves the latent a fraction
/// alpha_t toward a closed-form target:
///   target(c, y, x) = base_c(prompt) + 0.1 * depth(y, x)
/// where depth is the normalized control code averaged over the latent cell. With a
/// reference, target = 0.5 * target + 0.5 * signature_c.
class ToyDenoiser : public Denoiser {
 public:
  using Options = ToyOptions;

  explicit ToyDenoiser(ToySchedule schedule = ToySchedule::standard(),
                       std::shared_ptr<const ReferenceStore> references = std::make_shared<ReferenceStore>(),
                       Options options = {})
      : schedule_(std::move(schedule)), references_(std::move(references)), options_(options) {
    for (double a : schedule_.alphas)
      if (!(a > 0.0 && a <= 1.0)) throw Error("toy schedule: alpha must lie in (0, 1]");
  }

  std::string name() const override { return "toy"; }
  const ToySchedule& schedule() const { return schedule_; }

  /// Closed-form target for a conditioning at a given latent shape.
  LatentTensor target_latent(const Conditioning& cond, LatentShape shape) const {
    LatentTensor t(shape);
    const auto plan = make_plan(cond, shape, "target", -1);
    for (int c = 0; c < shape.channels; ++c)
      for (int y = 0; y < shape.height; ++y)
        for (int x = 0; x < shape.width; ++x) t.at(c, y, x) = static_cast<float>(plan.target(c, x, y));
    return t;
  }

  LatentTensor step(const PathStep& call) override {
    pause();
    return compute(call);
  }

  std::vector<LatentTensor> step_batch(std::span<const PathStep> batch) override {
    pause();
    std::vector<LatentTensor> out(batch.size());
    const unsigned hw = std::thread::hardware_concurrency();
    if (!options_.concurrent_batches || batch.size() < 2 || hw < 2) {
      for (std::size_t i = 0; i < batch.size(); ++i) out[i] = compute(batch[i]);
      return out;
    }
    std::vector<std::future<LatentTensor>> futures;
    futures.reserve(batch.size());
    for (const auto& call : batch) futures.push_back(std::async(std::launch::async, [&] { return compute(call); }));
    for (std::size_t i = 0; i < batch.size(); ++i) out[i] = futures[i].get();
    return out;
  }

 private:
  struct Plan {
    std::vector<double> base;  // per channel, already mixed with the reference
    const Grid<float>* depth = nullptr;
    double depth_weight = kToyDepthWeight;

    double target(int c, int x, int y) const {
      return base[c] + depth_weight * (depth ? depth->at(x, y) : 0.0);
    }
  };

  Plan make_plan(const Conditioning& cond, LatentShape shape, const std::string& path, int t) const {
    Plan p;
    p.base.resize(static_cast<std::size_t>(shape.channels));
    for (int c = 0; c < shape.channels; ++c) p.base[c] = toy_prompt_base(cond.prompt, c);
    if (cond.control) p.depth = &cond.control->normalized_cells(shape.width, shape.height);
    if (cond.reference_id) {
      auto sig = references_->get(*cond.reference_id);
      if (!sig) throw DenoiserError("unknown reference id \"" + *cond.reference_id + "\"", path, t);
      if (sig->size() != p.base.size()) throw DenoiserError("reference signature channel mismatch", path, t);
      p.depth_weight *= 1.0 - kToyReferenceMix;
      for (int c = 0; c < shape.channels; ++c)
        p.base[c] = (1.0 - kToyReferenceMix) * p.base[c] + kToyReferenceMix * (*sig)[c];
    }
    return p;
  }

  LatentTensor compute(const PathStep& call) const {
    if (call.timestep < 0 || call.timestep >= schedule_.steps())
      throw DenoiserError("timestep out of range [0, " + std::to_string(schedule_.steps()) + ")", call.path_id,
                          call.timestep);
    const auto& z = call.latent;
    Plan plan;
    try {
      plan = make_plan(call.conditioning, z.shape(), call.path_id, call.timestep);
    } catch (const ShapeError& e) {
      throw DenoiserError(e.what(), call.path_id, call.timestep);
    }
    const double alpha = schedule_.alphas[static_cast<std::size_t>(call.timestep)];
    LatentTensor out(z.shape());
    for (int c = 0; c < z.channels(); ++c)
      for (int y = 0; y < z.height(); ++y)
        for (int x = 0; x < z.width(); ++x) {
          const double v = z.at(c, y, x);
          out.at(c, y, x) = static_cast<float>(v + alpha * (plan.target(c, x, y) - v));
        }
    return out;
  }

  void pause() const {
    if (options_.dispatch_latency.count() > 0) std::this_thread::sleep_for(options_.dispatch_latency);
  }

  ToySchedule schedule_;
  std::shared_ptr<const ReferenceStore> references_;
  Options options_;
};

/// Channel-0 preview: diverging red/blue colormap (zero maps to mid-gray), each latent cell
/// upsampled to an 8x8 block, encoded as 8-bit RGB PNG.
inline png::Bytes decode_preview(const LatentTensor& latent, int upsample = 8) {
  const int w = latent.width() * upsample;
  const int h = latent.height() * upsample;
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double v = latent.channels() > 0 ? latent.at(0, y / upsample, x / upsample) : 0.0;
      const double t = 0.5 + 0.5 * std::tanh(v);
      auto* px = &rgb[(static_cast<std::size_t>(y) * w + x) * 3];
      px[0] = static_cast<std::uint8_t>(std::lround(255.0 * t));
      px[1] = 128;
      px[2] = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - t)));
    }
  return png::encode_rgb8(w, h, rgb);
}

}  // namespace poci
