#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "poci/errors.hpp"
#include "poci/raster_io.hpp"
#include "poci/tensor.hpp"

namespace poci {

/// Full-resolution layout depth as sent to a denoiser. The 16-bit export codes are the
/// canonical form: in-process and remote backends both see exactly these values.
class DepthControl {
 public:
  explicit DepthControl(DepthMap depth) : depth_(std::move(depth)), codes_(encode_depth_codes(depth_)) {}

  /// Rebuilds a control signal from its PNG export (server side of the wire protocol).
  static std::shared_ptr<const DepthControl> from_png(const png::Bytes& bytes) {
    auto img = png::decode_gray16(bytes);
    auto ctrl = std::shared_ptr<DepthControl>(new DepthControl(import_depth(bytes), std::move(img.pixels)));
    ctrl->png_ = bytes;
    ctrl->png_ready_ = true;
    return ctrl;
  }

  const DepthMap& depth() const { return depth_; }
  const Grid<std::uint16_t>& codes() const { return codes_.codes; }

  const png::Bytes& png() const {
    std::lock_guard lock(mutex_);
    if (!png_ready_) {
      png_ = export_depth(depth_);
      png_ready_ = true;
    }
    return png_;
  }

  /// Codes scaled to [0, 1] and averaged over each cell of a width x height grid.
  const Grid<float>& normalized_cells(int width, int height) const {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(width, height);
    auto it = cells_.find(key);
    if (it != cells_.end()) return it->second;
    const auto& c = codes_.codes;
    if (width <= 0 || height <= 0 || c.width % width != 0 || c.height % height != 0)
      throw ShapeError("control depth " + std::to_string(c.width) + "x" + std::to_string(c.height) +
                       " does not tile a " + std::to_string(width) + "x" + std::to_string(height) + " grid");
    const int fx = c.width / width, fy = c.height / height;
    Grid<float> g(width, height);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        std::uint64_t sum = 0;
        for (int yy = y * fy; yy < (y + 1) * fy; ++yy)
          for (int xx = x * fx; xx < (x + 1) * fx; ++xx) sum += c.at(xx, yy);
        g.at(x, y) = static_cast<float>(static_cast<double>(sum) / (65535.0 * fx * fy));
      }
    return cells_.emplace(key, std::move(g)).first->second;
  }

 private:
  DepthControl(DepthMap depth, Grid<std::uint16_t> codes) : depth_(std::move(depth)) {
    codes_.codes = std::move(codes);
    codes_.far = depth_.far;
  }

  DepthMap depth_;
  DepthCodes codes_;
  mutable std::mutex mutex_;
  mutable png::Bytes png_;
  mutable bool png_ready_ = false;
  mutable std::map<std::pair<int, int>, Grid<float>> cells_;
};

struct Conditioning {
  std::string prompt;
  std::shared_ptr<const DepthControl> control;
  std::optional<std::string> reference_id;
  double guidance = 7.5;
};

/// One denoiser invocation for one path at one timestep.
struct PathStep {
  std::string path_id;
  int timestep = 0;
  const LatentTensor& latent;
  const Conditioning& conditioning;
  std::uint64_t seed = 0;
};

/// step(latent, t, conditioning) -> predicted latent of the same shape. Implementations must
/// be deterministic in (latent, t, conditioning, seed) and report failures as DenoiserError.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual std::string name() const = 0;
  virtual LatentTensor step(const PathStep& call) = 0;

  /// Evaluates independent paths of one timestep. Result order follows `batch`.
  virtual std::vector<LatentTensor> step_batch(std::span<const PathStep> batch) {
    std::vector<LatentTensor> out;
    out.reserve(batch.size());
    for (const auto& call : batch) out.push_back(step(call));
    return out;
  }

  virtual int max_batch() const { return 64; }
};

/// Per-channel identity signatures of reference images, keyed by reference id.
class ReferenceStore {
 public:
  void put(const std::string& id, std::vector<float> signature) {
    std::lock_guard lock(mutex_);
    signatures_[id] = std::move(signature);
  }
  std::optional<std::vector<float>> get(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = signatures_.find(id);
    if (it == signatures_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return signatures_.size();
  }

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::vector<float>> signatures_;
};

}  // namespace poci
