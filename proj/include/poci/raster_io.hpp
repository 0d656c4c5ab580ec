#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "poci/png_io.hpp"
#include "poci/raster.hpp"

namespace poci {

inline constexpr const char* kDepthMappingText =
    "code = round(65535 * (1/z - 1/far) / (1/near - 1/far)); code 0 = miss (z = far)";

/// 16-bit inverse-depth codes for a depth map, plus the normalization range used.
struct DepthCodes {
  Grid<std::uint16_t> codes;
  double near = kDefaultFar;
  double far = kDefaultFar;
};

inline double nearest_depth(const DepthMap& depth) {
  double near = depth.far;
  for (double z : depth.z.data)
    if (z < near) near = z;
  return near;
}

inline DepthCodes encode_depth_codes(const DepthMap& depth) {
  DepthCodes out{Grid<std::uint16_t>(depth.width(), depth.height(), 0), nearest_depth(depth), depth.far};
  if (!(out.near < out.far)) return out;
  const double inv_far = 1.0 / out.far;
  const double range = 1.0 / out.near - inv_far;
  for (std::size_t i = 0; i < depth.z.size(); ++i) {
    const double z = depth.z.data[i];
    if (z >= depth.far) continue;
    const double v = std::round(65535.0 * (1.0 / z - inv_far) / range);
    out.codes.data[i] = static_cast<std::uint16_t>(std::clamp(v, 0.0, 65535.0));
  }
  return out;
}

namespace raster_detail {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const png::TextChunks& text, const std::string& key) {
  auto it = text.find(key);
  if (it == text.end()) throw ParseError("depth png: missing text chunk " + key);
  double v = 0.0;
  const auto& s = it->second;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw ParseError("depth png: malformed " + key);
  return v;
}

}  // namespace raster_detail

/// Encodes a depth map as a 16-bit grayscale PNG carrying near/far and the mapping as text chunks.
inline png::Bytes export_depth(const DepthMap& depth) {
  const auto codes = encode_depth_codes(depth);
  png::TextChunks text{{"near", raster_detail::format_double(codes.near)},
                       {"far", raster_detail::format_double(codes.far)},
                       {"mapping", kDepthMappingText}};
  return png::encode_gray16(codes.codes, text);
}

/// Inverts the export mapping. Values are recovered up to 16-bit quantization.
inline DepthMap import_depth(const png::Bytes& bytes) {
  auto img = png::decode_gray16(bytes);
  const double near = raster_detail::parse_double(img.text, "near");
  const double far = raster_detail::parse_double(img.text, "far");
  if (!(near > 0.0) || !(far >= near)) throw ParseError("depth png: invalid near/far range");
  DepthMap out{Grid<double>(img.pixels.width, img.pixels.height, far), far};
  const double inv_far = 1.0 / far;
  const double range = 1.0 / near - inv_far;
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const auto code = img.pixels.data[i];
    if (code == 0) continue;
    out.z.data[i] = 1.0 / (code / 65535.0 * range + inv_far);
  }
  return out;
}

inline std::vector<png::RGB> mask_palette(std::size_t objects) {
  std::vector<png::RGB> palette{{0, 0, 0}};
  for (std::size_t k = 1; k <= objects; ++k) {
    // golden-angle hue walk, fixed saturation/value
    const double h = std::fmod(k * 137.50776405, 360.0) / 60.0;
    const double c = 0.85, x = c * (1 - std::fabs(std::fmod(h, 2.0) - 1));
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(h)) {
      case 0: r = c, g = x; break;
      case 1: r = x, g = c; break;
      case 2: g = c, b = x; break;
      case 3: g = x, b = c; break;
      case 4: r = x, b = c; break;
      default: r = c, b = x; break;
    }
    auto q = [](double v) { return static_cast<std::uint8_t>(std::lround((v + 0.1) * 255.0 / 0.95)); };
    palette.push_back({q(r), q(g), q(b)});
  }
  return palette;
}

/// Debug export: 8-bit indexed PNG, index 0 = background, index k = k-th object.
inline png::Bytes export_masks(const MaskSet& masks) {
  if (masks.object_count() > 255) throw Error("mask export supports at most 255 objects");
  Grid<std::uint8_t> idx(masks.width(), masks.height());
  for (std::size_t i = 0; i < idx.size(); ++i) idx.data[i] = static_cast<std::uint8_t>(masks.labels.data[i]);
  png::TextChunks text;
  for (std::size_t k = 0; k < masks.ids.size(); ++k) text["object." + std::to_string(k + 1)] = masks.ids[k];
  return png::encode_indexed(idx, mask_palette(masks.object_count()), text);
}

}  // namespace poci
