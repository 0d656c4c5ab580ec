#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "poci/errors.hpp"
#include "poci/grid.hpp"
#include "poci/scene.hpp"

namespace poci {

inline constexpr double kDefaultFar = 100.0;

/// Camera-space z of the nearest box surface per pixel; misses hold `far`.
struct DepthMap {
  Grid<double> z;
  double far = kDefaultFar;

  int width() const { return z.width; }
  int height() const { return z.height; }
  bool is_miss(int x, int y) const { return z.at(x, y) >= far; }

  friend bool operator==(const DepthMap&, const DepthMap&) = default;
};

/// Occlusion-aware partition of the image plane. labels: 0 = background,
/// k = k-th object of `ids` (1-based, scene order).
struct MaskSet {
  Grid<std::uint16_t> labels;
  std::vector<std::string> ids;

  int width() const { return labels.width; }
  int height() const { return labels.height; }
  std::size_t object_count() const { return ids.size(); }

  Mask object_mask(std::size_t index) const { return label_mask(static_cast<std::uint16_t>(index + 1)); }
  Mask object_mask(const std::string& id) const {
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (ids[i] == id) return object_mask(i);
    return Mask(width(), height());
  }
  Mask background_mask() const { return label_mask(0); }

  Mask label_mask(std::uint16_t label) const {
    Mask m(width(), height());
    for (std::size_t i = 0; i < labels.size(); ++i) m.data[i] = labels.data[i] == label ? 1 : 0;
    return m;
  }

  friend bool operator==(const MaskSet&, const MaskSet&) = default;
};

struct RayHit {
  double t_entry = 0.0;
  double z_depth = 0.0;
};

/// Slab intersection in the box's yaw-aligned frame. Returns the nearest non-negative entry
/// (0 when `origin` is inside the box). `z_depth` is the entry point's coordinate along
/// `view_axis` (unit length) measured from `origin`.
inline std::optional<RayHit> ray_box_intersect(const Vec3& origin, const Vec3& direction, const OrientedBox& box,
                                               const Vec3& view_axis) {
  const YawRotation rot(box.yaw);
  const Vec3 o = rot.inverse(origin - box.center);
  const Vec3 d = rot.inverse(direction);
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    const double half = box.size[axis] * 0.5;
    const double oa = o[axis];
    const double da = d[axis];
    if (da == 0.0) {
      if (oa < -half || oa > half) return std::nullopt;
      continue;
    }
    double t1 = (-half - oa) / da;
    double t2 = (half - oa) / da;
    if (t1 > t2) std::swap(t1, t2);
    t_near = std::max(t_near, t1);
    t_far = std::min(t_far, t2);
  }
  if (t_near > t_far || t_far < 0.0) return std::nullopt;
  const double t = std::max(t_near, 0.0);
  return RayHit{t, t * dot(direction, view_axis)};
}

inline std::optional<RayHit> ray_box_intersect(const Vec3& origin, const Vec3& direction, const OrientedBox& box) {
  const double n = norm(direction);
  return ray_box_intersect(origin, direction, box, direction * (1.0 / n));
}

struct LayoutRender {
  DepthMap depth;
  MaskSet masks;
};

struct RenderOptions {
  double far = kDefaultFar;
};

/// Casts one ray per pixel center and keeps the nearest box hit with 0 < z < far.
/// Equal depths resolve toward the earlier object in scene order.
inline LayoutRender render_layout(const Scene& scene, const RenderOptions& opts = {}) {
  const Camera& cam = scene.camera;
  const auto basis = cam.basis();
  LayoutRender out{DepthMap{Grid<double>(cam.width, cam.height, opts.far), opts.far},
                   MaskSet{Grid<std::uint16_t>(cam.width, cam.height, 0), {}}};
  for (const auto& o : scene.objects) out.masks.ids.push_back(o.box.id);

  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const Vec3 dir_cam = cam.ray_camera(x + 0.5, y + 0.5);
      const Vec3 dir = cam.direction_to_world(dir_cam, basis);
      double best = opts.far;
      std::uint16_t label = 0;
      for (std::size_t i = 0; i < scene.objects.size(); ++i) {
        auto hit = ray_box_intersect(cam.position, dir, scene.objects[i].box, basis.forward);
        if (!hit || !(hit->z_depth > 0.0)) continue;
        if (hit->z_depth < best) {
          best = hit->z_depth;
          label = static_cast<std::uint16_t>(i + 1);
        }
      }
      out.depth.z.at(x, y) = best;
      out.masks.labels.at(x, y) = label;
    }
  }
  return out;
}

inline DepthMap render_depth(const Scene& scene, const RenderOptions& opts = {}) {
  return render_layout(scene, opts).depth;
}

inline MaskSet render_masks(const Scene& scene, const RenderOptions& opts = {}) {
  return render_layout(scene, opts).masks;
}

/// Majority vote per factor x factor cell. Ties go to the candidate with the smaller mean
/// depth inside the cell; background loses every tie against an object; remaining ties go
/// to the earlier object.
inline MaskSet downsample_masks(const MaskSet& masks, const DepthMap& depth, int factor) {
  if (factor <= 0 || masks.width() % factor != 0 || masks.height() % factor != 0)
    throw ShapeError("downsample factor " + std::to_string(factor) + " does not divide " +
                     std::to_string(masks.width()) + "x" + std::to_string(masks.height()));
  if (depth.width() != masks.width() || depth.height() != masks.height())
    throw ShapeError("depth map and masks differ in resolution");
  const int cw = masks.width() / factor;
  const int ch = masks.height() / factor;
  const std::size_t labels = masks.object_count() + 1;
  MaskSet out{Grid<std::uint16_t>(cw, ch, 0), masks.ids};
  std::vector<int> count(labels);
  std::vector<double> depth_sum(labels);
  for (int cy = 0; cy < ch; ++cy) {
    for (int cx = 0; cx < cw; ++cx) {
      std::fill(count.begin(), count.end(), 0);
      std::fill(depth_sum.begin(), depth_sum.end(), 0.0);
      for (int y = cy * factor; y < (cy + 1) * factor; ++y) {
        for (int x = cx * factor; x < (cx + 1) * factor; ++x) {
          const auto l = masks.labels.at(x, y);
          ++count[l];
          depth_sum[l] += depth.z.at(x, y);
        }
      }
      std::size_t best = 0;
      for (std::size_t l = 1; l < labels; ++l) {
        if (count[l] == 0) continue;
        if (count[l] > count[best] || (best == 0 && count[l] == count[best])) {
          best = l;
        } else if (count[l] == count[best] && depth_sum[l] / count[l] < depth_sum[best] / count[best]) {
          best = l;
        }
      }
      out.labels.at(cx, cy) = static_cast<std::uint16_t>(best);
    }
  }
  return out;
}

inline MaskSet downsample_masks(const LayoutRender& render, int factor) {
  return downsample_masks(render.masks, render.depth, factor);
}

}  // namespace poci
