#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "poci/errors.hpp"
#include "poci/nelder_mead.hpp"
#include "poci/raster.hpp"
#include "poci/scene.hpp"

namespace poci {

struct Rect2D {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }

  friend bool operator==(const Rect2D&, const Rect2D&) = default;
};

inline constexpr double kProjectionNearPlane = 0.01;

/// Axis-aligned hull of the box's projection, clipped to the image. Edges crossing the
/// z = 0.01 m plane are cut there. Returns nothing when no part of the box lies in front of it.
inline std::optional<Rect2D> project_box_rect(const Camera& cam, const OrientedBox& box) {
  const auto basis = cam.basis();
  const YawRotation rot(box.yaw);
  std::array<Vec3, 8> corners;
  for (int i = 0; i < 8; ++i) {
    const Vec3 local{(i & 1 ? 0.5 : -0.5) * box.size.x, (i & 2 ? 0.5 : -0.5) * box.size.y,
                     (i & 4 ? 0.5 : -0.5) * box.size.z};
    corners[i] = cam.to_camera(box.center + rot.apply(local), basis);
  }
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
  double x1 = -x0, y1 = -x0;
  bool any = false;
  auto add = [&](const Vec3& p) {
    const double u = cam.cx + cam.fx * p.x / p.z;
    const double v = cam.cy - cam.fy * p.y / p.z;
    x0 = std::min(x0, u);
    x1 = std::max(x1, u);
    y0 = std::min(y0, v);
    y1 = std::max(y1, v);
    any = true;
  };
  for (const auto& c : corners)
    if (c.z > kProjectionNearPlane) add(c);
  if (!any) return std::nullopt;
  for (int i = 0; i < 8; ++i) {
    for (int bit = 1; bit < 8; bit <<= 1) {
      const int j = i | bit;
      if (j == i) continue;
      const Vec3& a = corners[i];
      const Vec3& b = corners[j];
      if ((a.z > kProjectionNearPlane) == (b.z > kProjectionNearPlane)) continue;
      const double t = (kProjectionNearPlane - a.z) / (b.z - a.z);
      Vec3 p = a + (b - a) * t;
      p.z = kProjectionNearPlane;
      add(p);
    }
  }
  const double w = cam.width, h = cam.height;
  return Rect2D{std::clamp(x0, 0.0, w), std::clamp(y0, 0.0, h), std::clamp(x1, 0.0, w), std::clamp(y1, 0.0, h)};
}

/// Intersection over union; 0 when the union has no area.
inline double rect_iou(const Rect2D& a, const Rect2D& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  const double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

/// Mean IoU over index-aligned pairs; a missing prediction scores 0. Empty input gives 0.
inline double mean_iou(const std::vector<std::optional<Rect2D>>& pred, const std::vector<Rect2D>& gt) {
  if (pred.size() != gt.size())
    throw ShapeError("mean_iou: " + std::to_string(pred.size()) + " predictions vs " + std::to_string(gt.size()) +
                     " ground-truth rects");
  if (gt.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i)
    if (pred[i]) sum += rect_iou(*pred[i], gt[i]);
  return sum / static_cast<double>(gt.size());
}

inline double mean_iou(const std::vector<Rect2D>& pred, const std::vector<Rect2D>& gt) {
  return mean_iou(std::vector<std::optional<Rect2D>>(pred.begin(), pred.end()), gt);
}

inline std::vector<std::optional<Rect2D>> project_boxes(const Camera& cam, const std::vector<OrientedBox>& boxes) {
  std::vector<std::optional<Rect2D>> out;
  out.reserve(boxes.size());
  for (const auto& b : boxes) out.push_back(project_box_rect(cam, b));
  return out;
}

/// 1 - mIoU of the projected boxes against the annotations.
inline double layout_loss(const Camera& cam, const std::vector<OrientedBox>& boxes, const std::vector<Rect2D>& gt) {
  return 1.0 - mean_iou(project_boxes(cam, boxes), gt);
}

struct FitConfig {
  int restarts = 5;
  double simplex_tolerance = 1e-4;
  int max_iterations = 500;
  // initial simplex offsets; wide enough to leave zero-overlap plateaus
  double position_step = 0.5;
  double angle_step = 0.3;
  // restarts after the first add uniform jitter of this half-width
  double jitter_position = 0.5;
  double jitter_angle = 0.3;
  // jitter around the best pose found so far instead of around init
  bool restart_from_best = true;
  std::uint64_t seed = 0;
};

struct FitResult {
  Camera camera;
  double final_loss = 1.0;
  int iterations = 0;
  int restarts_used = 0;
  int best_restart = 0;
};

namespace fit_detail {

using Pose = std::array<double, 5>;
inline constexpr double kPitchLimit = pi / 2 - 1e-6;

inline Pose pose_of(const Camera& c) { return {c.position.x, c.position.y, c.position.z, c.yaw, c.pitch}; }

inline Camera with_pose(Camera c, const Pose& p) {
  c.position = {p[0], p[1], p[2]};
  c.yaw = (p[3] >= -pi && p[3] < pi) ? p[3] : wrap_angle(p[3]);
  c.pitch = p[4];
  return c;
}

}  // namespace fit_detail

/// Fits camera position, yaw and pitch (intrinsics fixed) by minimizing 1 - mIoU with
/// multi-restart Nelder-Mead. Restart 0 starts at `init`; later restarts start from jittered
/// copies of the best pose so far (or of `init`). The best restart wins, ties to the lower index.
inline FitResult fit_camera(const std::vector<OrientedBox>& boxes, const std::vector<Rect2D>& gt, const Camera& init,
                            const FitConfig& cfg = {}) {
  using namespace fit_detail;
  if (boxes.empty()) throw Error("fit_camera: empty object list");
  if (boxes.size() != gt.size()) throw ShapeError("fit_camera: boxes and annotations differ in length");
  {
    ValidationReport report;
    validate_camera(init, report);
    if (!report.empty()) throw Error("fit_camera: invalid initial camera: " + format_report(report));
  }

  auto objective = [&](const Pose& p) {
    if (!(std::fabs(p[4]) < kPitchLimit)) return 1.0 + std::fabs(p[4]);
    return layout_loss(with_pose(init, p), boxes, gt);
  };

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const Pose steps{cfg.position_step, cfg.position_step, cfg.position_step, cfg.angle_step, cfg.angle_step};
  NelderMeadOptions opts;
  opts.diameter_tolerance = cfg.simplex_tolerance;
  opts.max_iterations = cfg.max_iterations;

  FitResult best;
  best.final_loss = std::numeric_limits<double>::infinity();
  const int restarts = std::max(1, cfg.restarts);
  for (int r = 0; r < restarts; ++r) {
    Pose start = (r > 0 && cfg.restart_from_best) ? pose_of(best.camera) : pose_of(init);
    if (r > 0) {
      for (int k = 0; k < 3; ++k) start[k] += cfg.jitter_position * unit(rng);
      for (int k = 3; k < 5; ++k) start[k] += cfg.jitter_angle * unit(rng);
      start[4] = std::clamp(start[4], -kPitchLimit * 0.99, kPitchLimit * 0.99);
    }
    auto res = nelder_mead(objective, start, steps, opts);
    if (res.value < best.final_loss) {
      best.camera = with_pose(init, res.x);
      best.final_loss = res.value;
      best.iterations = res.iterations;
      best.best_restart = r;
    }
  }
  best.restarts_used = restarts;
  // re-evaluate on the returned camera so final_loss matches it exactly after yaw wrapping
  best.final_loss = layout_loss(best.camera, boxes, gt);
  return best;
}

struct LiftConfig {
  // depth extent of the lifted box as a fraction of (width + height)
  double depth_extent_ratio = 0.01;
};

/// Lifts a 2D box to 3D at the mean non-far depth inside it. The box is centered on the
/// back-projected rect center at that depth, with width/height back-projected from the rect
/// extents and yaw 0.
inline OrientedBox lift_box(const Rect2D& rect, const DepthMap& depth, const Camera& cam,
                            const LiftConfig& cfg = {}) {
  if (!(rect.width() > 0.0) || !(rect.height() > 0.0)) throw Error("lift_box: degenerate rect");
  if (rect.x_max <= 0.0 || rect.y_max <= 0.0 || rect.x_min >= depth.width() || rect.y_min >= depth.height())
    throw Error("lift_box: rect does not intersect the image");
  double sum = 0.0;
  std::size_t n = 0;
  const int x_begin = std::max(0, static_cast<int>(std::floor(rect.x_min)));
  const int x_end = std::min(depth.width(), static_cast<int>(std::ceil(rect.x_max)) + 1);
  const int y_begin = std::max(0, static_cast<int>(std::floor(rect.y_min)));
  const int y_end = std::min(depth.height(), static_cast<int>(std::ceil(rect.y_max)) + 1);
  for (int y = y_begin; y < y_end; ++y) {
    const double v = y + 0.5;
    if (v < rect.y_min || v > rect.y_max) continue;
    for (int x = x_begin; x < x_end; ++x) {
      const double u = x + 0.5;
      if (u < rect.x_min || u > rect.x_max || depth.is_miss(x, y)) continue;
      sum += depth.z.at(x, y);
      ++n;
    }
  }
  if (n == 0) throw Error("lift_box: no depth inside rect (all-far region)");
  const double d = sum / static_cast<double>(n);
  const double uc = 0.5 * (rect.x_min + rect.x_max);
  const double vc = 0.5 * (rect.y_min + rect.y_max);
  OrientedBox box;
  box.center = cam.to_world(cam.ray_camera(uc, vc) * d);
  const double w = rect.width() / cam.fx * d;
  const double h = rect.height() / cam.fy * d;
  box.size = {w, h, cfg.depth_extent_ratio * (w + h)};
  box.yaw = 0.0;
  return box;
}

}  // namespace poci
