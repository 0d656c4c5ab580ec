#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "poci/errors.hpp"
#include "poci/scene.hpp"

namespace poci {

inline constexpr int kLayoutSchemaVersion = 1;

struct LoadedLayout {
  Scene scene;
  std::vector<std::string> warnings;
};

namespace layout_detail {

using nlohmann::json;

inline json vec3_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

class Reader {
 public:
  explicit Reader(std::vector<std::string>& warnings) : warnings_(warnings) {}

  const json& member(const json& obj, const char* key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(path + "." + key + ": missing field");
    return *it;
  }

  double number(const json& obj, const char* key, const std::string& path) {
    const auto& v = member(obj, key, path);
    if (!v.is_number()) throw ParseError(path + "." + key + ": expected a number");
    return v.get<double>();
  }

  int integer(const json& obj, const char* key, const std::string& path) {
    const auto& v = member(obj, key, path);
    if (!v.is_number_integer()) throw ParseError(path + "." + key + ": expected an integer");
    return v.get<int>();
  }

  std::string string(const json& obj, const char* key, const std::string& path) {
    const auto& v = member(obj, key, path);
    if (!v.is_string()) throw ParseError(path + "." + key + ": expected a string");
    return v.get<std::string>();
  }

  Vec3 vec3(const json& obj, const char* key, const std::string& path) {
    const auto& v = member(obj, key, path);
    if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() || !v[2].is_number())
      throw ParseError(path + "." + key + ": expected an array of 3 numbers");
    return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
  }

  void object(const json& v, const std::string& path) {
    if (!v.is_object()) throw ParseError(path + ": expected an object");
  }

  void warn_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& path) {
    std::set<std::string_view> k(known.begin(), known.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (!k.count(it.key())) warnings_.push_back("ignored unknown field " + path + "." + it.key());
  }

 private:
  std::vector<std::string>& warnings_;
};

inline json camera_to_json(const Camera& c) {
  return json{{"position", vec3_to_json(c.position)},
              {"yaw", c.yaw},
              {"pitch", c.pitch},
              {"fx", c.fx},
              {"fy", c.fy},
              {"cx", c.cx},
              {"cy", c.cy},
              {"width", c.width},
              {"height", c.height}};
}

inline Camera camera_from_json(Reader& r, const json& j, const std::string& path) {
  r.object(j, path);
  r.warn_unknown(j, {"position", "yaw", "pitch", "fx", "fy", "cx", "cy", "width", "height"}, path);
  Camera c;
  c.position = r.vec3(j, "position", path);
  c.yaw = r.number(j, "yaw", path);
  c.pitch = r.number(j, "pitch", path);
  c.fx = r.number(j, "fx", path);
  c.fy = r.number(j, "fy", path);
  c.cx = r.number(j, "cx", path);
  c.cy = r.number(j, "cy", path);
  c.width = r.integer(j, "width", path);
  c.height = r.integer(j, "height", path);
  return c;
}

inline json box_to_json(const OrientedBox& b) {
  return json{{"id", b.id}, {"center", vec3_to_json(b.center)}, {"size", vec3_to_json(b.size)}, {"yaw", b.yaw}};
}

inline json object_to_json(const ObjectSpec& o) {
  auto j = box_to_json(o.box);
  j["prompt"] = o.prompt;
  return j;
}

inline OrientedBox box_from_json(Reader& r, const json& j, const std::string& path) {
  OrientedBox b;
  b.id = r.string(j, "id", path);
  b.center = r.vec3(j, "center", path);
  b.size = r.vec3(j, "size", path);
  b.yaw = r.number(j, "yaw", path);
  return b;
}

inline ObjectSpec object_from_json(Reader& r, const json& j, const std::string& path) {
  r.object(j, path);
  r.warn_unknown(j, {"id", "prompt", "center", "size", "yaw"}, path);
  ObjectSpec o;
  o.box = box_from_json(r, j, path);
  o.prompt = r.string(j, "prompt", path);
  return o;
}

inline json parse_text(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t stop = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError("layout parse error at line " + std::to_string(line) + ", column " + std::to_string(col) +
                     ": " + e.what());
  }
}

}  // namespace layout_detail

inline nlohmann::json scene_to_json(const Scene& scene) {
  using namespace layout_detail;
  json objects = json::array();
  for (const auto& o : scene.objects) objects.push_back(object_to_json(o));
  return json{{"schema_version", kLayoutSchemaVersion},
              {"background_prompt", scene.background_prompt},
              {"camera", camera_to_json(scene.camera)},
              {"objects", std::move(objects)}};
}

inline LoadedLayout scene_from_json(const nlohmann::json& doc) {
  using namespace layout_detail;
  LoadedLayout out;
  Reader r(out.warnings);
  r.object(doc, "$");
  r.warn_unknown(doc, {"schema_version", "background_prompt", "camera", "objects"}, "$");
  const int version = r.integer(doc, "schema_version", "$");
  if (version != kLayoutSchemaVersion)
    throw SchemaVersionError("unsupported schema_version " + std::to_string(version) + " (expected " +
                             std::to_string(kLayoutSchemaVersion) + ")");
  out.scene.background_prompt = r.string(doc, "background_prompt", "$");
  out.scene.camera = camera_from_json(r, r.member(doc, "camera", "$"), "$.camera");
  const auto& objects = r.member(doc, "objects", "$");
  if (!objects.is_array()) throw ParseError("$.objects: expected an array");
  for (std::size_t i = 0; i < objects.size(); ++i)
    out.scene.objects.push_back(object_from_json(r, objects[i], "$.objects[" + std::to_string(i) + "]"));
  return out;
}

/// Serializes a scene as a layout document. Doubles are written in shortest round-trip form.
inline std::string save_layout(const Scene& scene) { return scene_to_json(scene).dump(2) + "\n"; }

/// Parses a layout document. Unknown fields are ignored and reported in `warnings`.
/// Does not validate scene invariants; call validate_scene on the result.
inline LoadedLayout load_layout(std::string_view text) {
  return scene_from_json(layout_detail::parse_text(text));
}

// Scene edits share the same field names as the layout document.

inline nlohmann::json edit_to_json(const SceneEdit& e) {
  using namespace layout_detail;
  return std::visit(
      [](const auto& op) -> json {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, edit::AddObject>) {
          return json{{"op", "add"}, {"object", object_to_json(op.object)}};
        } else if constexpr (std::is_same_v<T, edit::RemoveObject>) {
          return json{{"op", "remove"}, {"id", op.id}};
        } else if constexpr (std::is_same_v<T, edit::ReplaceObject>) {
          return json{{"op", "replace"}, {"id", op.id}, {"prompt", op.prompt}};
        } else if constexpr (std::is_same_v<T, edit::TransformObject>) {
          return json{{"op", "transform"}, {"id", op.id}, {"box", box_to_json(op.box)}};
        } else {
          return json{{"op", "camera"}, {"camera", camera_to_json(op.camera)}};
        }
      },
      e);
}

inline SceneEdit edit_from_json(const nlohmann::json& j, std::vector<std::string>& warnings,
                                const std::string& path = "$") {
  using namespace layout_detail;
  Reader r(warnings);
  r.object(j, path);
  const auto op = r.string(j, "op", path);
  if (op == "add") return edit::AddObject{object_from_json(r, r.member(j, "object", path), path + ".object")};
  if (op == "remove") return edit::RemoveObject{r.string(j, "id", path)};
  if (op == "replace") return edit::ReplaceObject{r.string(j, "id", path), r.string(j, "prompt", path)};
  if (op == "transform") {
    const auto& box = r.member(j, "box", path);
    r.object(box, path + ".box");
    auto b = box_from_json(r, box, path + ".box");
    return edit::TransformObject{r.string(j, "id", path), std::move(b)};
  }
  if (op == "camera") return edit::SetCamera{camera_from_json(r, r.member(j, "camera", path), path + ".camera")};
  throw ParseError(path + ".op: unknown edit \"" + op + "\"");
}

inline std::vector<SceneEdit> edits_from_json(const nlohmann::json& j, std::vector<std::string>& warnings) {
  if (!j.is_array()) throw ParseError("edits: expected an array");
  std::vector<SceneEdit> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(edit_from_json(j[i], warnings, "edits[" + std::to_string(i) + "]"));
  return out;
}

}  // namespace poci
