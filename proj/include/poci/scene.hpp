#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "poci/errors.hpp"
#include "poci/math.hpp"

namespace poci {

/// Box oriented by a yaw about world +Y. `size` is (width, height, depth) in meters.
struct OrientedBox {
  std::string id;
  Vec3 center;
  Vec3 size{1.0, 1.0, 1.0};
  double yaw = 0.0;

  friend bool operator==(const OrientedBox&, const OrientedBox&) = default;
};

struct ObjectSpec {
  OrientedBox box;
  std::string prompt;

  friend bool operator==(const ObjectSpec&, const ObjectSpec&) = default;
};

/// Orthonormal camera frame. Camera space is (right, up, forward).
struct CameraBasis {
  Vec3 right;
  Vec3 up;
  Vec3 forward;
};

/// Pinhole camera with roll fixed at zero. At yaw = pitch = 0 it looks along world +Z
/// with +Y up. Image rows grow downward: v = cy - fy * y_cam / z_cam.
struct Camera {
  Vec3 position;
  double yaw = 0.0;
  double pitch = 0.0;
  double fx = 256.0;
  double fy = 256.0;
  double cx = 128.0;
  double cy = 128.0;
  int width = 256;
  int height = 256;

  CameraBasis basis() const {
    const double cyaw = std::cos(yaw), syaw = std::sin(yaw);
    const double cp = std::cos(pitch), sp = std::sin(pitch);
    return {{cyaw, 0.0, -syaw}, {-syaw * sp, cp, -cyaw * sp}, {syaw * cp, sp, cyaw * cp}};
  }

  Vec3 to_camera(const Vec3& world, const CameraBasis& b) const {
    const Vec3 d = world - position;
    return {dot(d, b.right), dot(d, b.up), dot(d, b.forward)};
  }
  Vec3 to_camera(const Vec3& world) const { return to_camera(world, basis()); }

  Vec3 direction_to_world(const Vec3& cam, const CameraBasis& b) const {
    return b.right * cam.x + b.up * cam.y + b.forward * cam.z;
  }
  Vec3 to_world(const Vec3& cam) const {
    const auto b = basis();
    return position + direction_to_world(cam, b);
  }

  /// Camera-space ray direction (z component 1) through image point (u, v).
  Vec3 ray_camera(double u, double v) const { return {(u - cx) / fx, -(v - cy) / fy, 1.0}; }

  /// Default intrinsics for a given resolution: fx = fy = width, principal point at center.
  static Camera with_resolution(int w, int h) {
    Camera c;
    c.width = w;
    c.height = h;
    c.fx = c.fy = static_cast<double>(w);
    c.cx = w / 2.0;
    c.cy = h / 2.0;
    return c;
  }

  friend bool operator==(const Camera&, const Camera&) = default;
};

struct Scene {
  Camera camera;
  std::vector<ObjectSpec> objects;
  std::string background_prompt = "background";

  const ObjectSpec* find(const std::string& id) const {
    for (const auto& o : objects)
      if (o.box.id == id) return &o;
    return nullptr;
  }
  std::optional<std::size_t> index_of(const std::string& id) const {
    for (std::size_t i = 0; i < objects.size(); ++i)
      if (objects[i].box.id == id) return i;
    return std::nullopt;
  }

  friend bool operator==(const Scene&, const Scene&) = default;
};

namespace edit {
struct AddObject {
  ObjectSpec object;
  friend bool operator==(const AddObject&, const AddObject&) = default;
};
struct RemoveObject {
  std::string id;
  friend bool operator==(const RemoveObject&, const RemoveObject&) = default;
};
struct ReplaceObject {
  std::string id;
  std::string prompt;
  friend bool operator==(const ReplaceObject&, const ReplaceObject&) = default;
};
struct TransformObject {
  std::string id;
  OrientedBox box;
  friend bool operator==(const TransformObject&, const TransformObject&) = default;
};
struct SetCamera {
  Camera camera;
  friend bool operator==(const SetCamera&, const SetCamera&) = default;
};
}  // namespace edit

using SceneEdit =
    std::variant<edit::AddObject, edit::RemoveObject, edit::ReplaceObject, edit::TransformObject, edit::SetCamera>;

struct Violation {
  std::string field;
  std::string rule;

  std::string to_string() const { return field + ": " + rule; }
  friend bool operator==(const Violation&, const Violation&) = default;
};

using ValidationReport = std::vector<Violation>;

inline std::string format_report(const ValidationReport& report) {
  std::string out;
  for (const auto& v : report) {
    if (!out.empty()) out += "; ";
    out += v.to_string();
  }
  return out;
}

inline void validate_box(const OrientedBox& box, const std::string& prefix, ValidationReport& report) {
  if (box.id.empty()) report.push_back({prefix + ".id", "id must be non-empty"});
  if (!is_finite(box.center)) report.push_back({prefix + ".center", "center must be finite"});
  if (!(box.size.x > 0.0 && box.size.y > 0.0 && box.size.z > 0.0) || !is_finite(box.size))
    report.push_back({prefix + ".size", "size must be positive"});
  if (!(box.yaw >= -pi && box.yaw < pi)) report.push_back({prefix + ".yaw", "yaw must lie in [-pi, pi)"});
}

inline void validate_camera(const Camera& cam, ValidationReport& report) {
  if (!is_finite(cam.position)) report.push_back({"camera.position", "position must be finite"});
  if (!std::isfinite(cam.yaw)) report.push_back({"camera.yaw", "yaw must be finite"});
  if (!(cam.pitch > -pi / 2 && cam.pitch < pi / 2))
    report.push_back({"camera.pitch", "pitch must lie in (-pi/2, pi/2)"});
  if (!(cam.fx > 0.0) || !std::isfinite(cam.fx)) report.push_back({"camera.fx", "fx must be positive"});
  if (!(cam.fy > 0.0) || !std::isfinite(cam.fy)) report.push_back({"camera.fy", "fy must be positive"});
  if (cam.width <= 0) report.push_back({"camera.width", "width must be positive"});
  if (cam.height <= 0) report.push_back({"camera.height", "height must be positive"});
  if (!(cam.cx >= 0.0 && cam.cx < cam.width)) report.push_back({"camera.cx", "cx must lie in [0, width)"});
  if (!(cam.cy >= 0.0 && cam.cy < cam.height)) report.push_back({"camera.cy", "cy must lie in [0, height)"});
}

/// Checks every type invariant. An empty report means the scene is well-formed.
inline ValidationReport validate_scene(const Scene& scene) {
  ValidationReport report;
  validate_camera(scene.camera, report);
  if (scene.background_prompt.empty())
    report.push_back({"background_prompt", "background_prompt must be non-empty"});
  std::set<std::string> seen;
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const auto prefix = "objects[" + std::to_string(i) + "]";
    const auto& obj = scene.objects[i];
    validate_box(obj.box, prefix, report);
    if (obj.prompt.empty()) report.push_back({prefix + ".prompt", "prompt must be non-empty"});
    if (!seen.insert(obj.box.id).second) report.push_back({prefix + ".id", "duplicate id"});
  }
  return report;
}

namespace detail {

inline std::size_t require_index(const Scene& s, const std::string& id) {
  auto idx = s.index_of(id);
  if (!idx) throw EditError("unknown id \"" + id + "\"");
  return *idx;
}

}  // namespace detail

/// Returns a new scene with `e` applied. The input is never modified.
inline Scene apply_edit(const Scene& scene, const SceneEdit& e) {
  Scene out = scene;
  std::visit(
      [&](const auto& op) {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, edit::AddObject>) {
          if (out.find(op.object.box.id)) throw EditError("duplicate id \"" + op.object.box.id + "\"");
          out.objects.push_back(op.object);
        } else if constexpr (std::is_same_v<T, edit::RemoveObject>) {
          out.objects.erase(out.objects.begin() + static_cast<std::ptrdiff_t>(detail::require_index(out, op.id)));
        } else if constexpr (std::is_same_v<T, edit::ReplaceObject>) {
          out.objects[detail::require_index(out, op.id)].prompt = op.prompt;
        } else if constexpr (std::is_same_v<T, edit::TransformObject>) {
          const auto idx = detail::require_index(out, op.id);
          if (op.box.id != op.id) throw EditError("transform must keep id \"" + op.id + "\"");
          out.objects[idx].box = op.box;
        } else {
          out.camera = op.camera;
        }
      },
      e);
  if (auto report = validate_scene(out); !report.empty())
    throw EditError("edit produces an invalid scene: " + format_report(report));
  return out;
}

inline Scene apply_edits(const Scene& scene, const std::vector<SceneEdit>& edits) {
  Scene out = scene;
  for (const auto& e : edits) out = apply_edit(out, e);
  return out;
}

/// Edit list that turns `from` into `to` when applied in order. Moved or resized objects
/// come back as TransformObject. Objects whose relative order changed are re-added at the end.
/// The background prompt is not covered by any edit and is ignored.
inline std::vector<SceneEdit> diff_scenes(const Scene& from, const Scene& to) {
  std::vector<SceneEdit> edits;
  if (from.camera != to.camera) edits.push_back(edit::SetCamera{to.camera});

  // Longest prefix of `to` made of retained ids whose order agrees with `from`.
  std::size_t prefix = 0;
  std::size_t last_pos = 0;
  bool first = true;
  for (; prefix < to.objects.size(); ++prefix) {
    auto pos = from.index_of(to.objects[prefix].box.id);
    if (!pos || (!first && *pos <= last_pos)) break;
    last_pos = *pos;
    first = false;
  }
  std::set<std::string> kept;
  for (std::size_t i = 0; i < prefix; ++i) kept.insert(to.objects[i].box.id);

  for (const auto& o : from.objects)
    if (!kept.count(o.box.id)) edits.push_back(edit::RemoveObject{o.box.id});

  for (std::size_t i = 0; i < prefix; ++i) {
    const auto& target = to.objects[i];
    const auto& source = *from.find(target.box.id);
    if (source.box != target.box) edits.push_back(edit::TransformObject{target.box.id, target.box});
    if (source.prompt != target.prompt) edits.push_back(edit::ReplaceObject{target.box.id, target.prompt});
  }
  for (std::size_t i = prefix; i < to.objects.size(); ++i) edits.push_back(edit::AddObject{to.objects[i]});
  return edits;
}

inline const char* edit_name(const SceneEdit& e) {
  static constexpr const char* names[] = {"add", "remove", "replace", "transform", "camera"};
  return names[e.index()];
}

}  // namespace poci
