#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "poci/errors.hpp"

namespace poci {

/// Process-wide accounting of live latent-tensor bytes. Used as the memory measure of
/// generation runs; independent of the allocator.
class TensorTracker {
 public:
  static void add(std::int64_t bytes) {
    const auto now = live_.fetch_add(bytes) + bytes;
    auto peak = peak_.load();
    while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
    }
  }
  static void remove(std::int64_t bytes) { live_.fetch_sub(bytes); }
  static std::int64_t live() { return live_.load(); }
  static std::int64_t peak() { return peak_.load(); }
  static void reset_peak() { peak_.store(live_.load()); }

 private:
  static inline std::atomic<std::int64_t> live_{0};
  static inline std::atomic<std::int64_t> peak_{0};
};

struct LatentShape {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t count() const { return static_cast<std::size_t>(channels) * height * width; }
  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  std::string to_string() const {
    return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
  }
  friend bool operator==(const LatentShape&, const LatentShape&) = default;
};

/// C x h x w grid of 32-bit reals, channel-major (channel, row, column).
class LatentTensor {
 public:
  LatentTensor() = default;
  explicit LatentTensor(LatentShape shape, float fill = 0.0f) : shape_(shape), values_(shape.count(), fill) {
    if (shape.channels < 0 || shape.height < 0 || shape.width < 0) throw ShapeError("negative latent shape");
    track();
  }
  LatentTensor(const LatentTensor& o) : shape_(o.shape_), values_(o.values_) { track(); }
  LatentTensor(LatentTensor&& o) noexcept
      : shape_(o.shape_), values_(std::move(o.values_)), tracked_(std::exchange(o.tracked_, 0)) {
    o.shape_ = {};
    o.values_.clear();
  }
  LatentTensor& operator=(const LatentTensor& o) {
    if (this != &o) {
      untrack();
      shape_ = o.shape_;
      values_ = o.values_;
      track();
    }
    return *this;
  }
  LatentTensor& operator=(LatentTensor&& o) noexcept {
    if (this != &o) {
      untrack();
      shape_ = std::exchange(o.shape_, {});
      values_ = std::move(o.values_);
      o.values_.clear();
      tracked_ = std::exchange(o.tracked_, 0);
    }
    return *this;
  }
  ~LatentTensor() { untrack(); }

  const LatentShape& shape() const { return shape_; }
  int channels() const { return shape_.channels; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  float& at(int c, int y, int x) { return values_[index(c, y, x)]; }
  float at(int c, int y, int x) const { return values_[index(c, y, x)]; }
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x;
  }

  std::span<float> values() { return values_; }
  std::span<const float> values() const { return values_; }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](float v) { return std::isfinite(v); });
  }

 private:
  void track() {
    tracked_ = static_cast<std::int64_t>(values_.size() * sizeof(float));
    TensorTracker::add(tracked_);
  }
  void untrack() {
    if (tracked_) TensorTracker::remove(tracked_);
    tracked_ = 0;
  }

  LatentShape shape_;
  std::vector<float> values_;
  std::int64_t tracked_ = 0;
};

/// Bitwise equality of shape and every value (distinguishes -0 from +0 and NaN payloads).
inline bool bit_equal(const LatentTensor& a, const LatentTensor& b) {
  return a.shape() == b.shape() &&
         (a.size() == 0 || std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(float)) == 0);
}

inline float max_abs_diff(const LatentTensor& a, const LatentTensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("max_abs_diff: shape mismatch");
  float m = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a.values()[i] - b.values()[i]));
  return m;
}

namespace tensor_detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace tensor_detail

/// Little-endian float32 values in (channel, row, column) order, no header.
inline std::vector<std::uint8_t> latent_payload(const LatentTensor& t) {
  std::vector<std::uint8_t> out;
  out.reserve(t.size() * 4);
  for (float v : t.values()) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    tensor_detail::put_u32(out, bits);
  }
  return out;
}

inline LatentTensor latent_from_payload(LatentShape shape, std::span<const std::uint8_t> bytes) {
  if (bytes.size() != shape.count() * 4)
    throw ShapeError("latent payload holds " + std::to_string(bytes.size()) + " bytes, shape " + shape.to_string() +
                     " needs " + std::to_string(shape.count() * 4));
  LatentTensor t(shape);
  auto vals = t.values();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const std::uint32_t bits = tensor_detail::get_u32(bytes.data() + 4 * i);
    std::memcpy(&vals[i], &bits, 4);
  }
  return t;
}

inline constexpr char kSnapshotMagic[4] = {'P', 'L', 'A', 'T'};

/// Snapshot: "PLAT", u32 version (1), u32 channels, u32 height, u32 width, then the payload.
inline std::vector<std::uint8_t> save_latent(const LatentTensor& t) {
  std::vector<std::uint8_t> out(kSnapshotMagic, kSnapshotMagic + 4);
  tensor_detail::put_u32(out, 1);
  tensor_detail::put_u32(out, static_cast<std::uint32_t>(t.channels()));
  tensor_detail::put_u32(out, static_cast<std::uint32_t>(t.height()));
  tensor_detail::put_u32(out, static_cast<std::uint32_t>(t.width()));
  auto payload = latent_payload(t);
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

inline LatentTensor load_latent(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kSnapshotMagic, 4) != 0)
    throw ParseError("latent snapshot: bad header");
  if (tensor_detail::get_u32(bytes.data() + 4) != 1) throw ParseError("latent snapshot: unsupported version");
  LatentShape shape{static_cast<int>(tensor_detail::get_u32(bytes.data() + 8)),
                    static_cast<int>(tensor_detail::get_u32(bytes.data() + 12)),
                    static_cast<int>(tensor_detail::get_u32(bytes.data() + 16))};
  return latent_from_payload(shape, bytes.subspan(20));
}

}  // namespace poci
