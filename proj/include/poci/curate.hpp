#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "poci/fit.hpp"
#include "poci/layout_io.hpp"
#include "poci/raster_io.hpp"

namespace poci {

// Input pairs: <name>.png is a depth export, <name>.json its annotation:
//   {"background_prompt": str,
//    "intrinsics": {"fx", "fy", "cx", "cy"}           optional, defaults from the image size
//    "objects": [{"id": str, "prompt": str, "bbox": [x_min, y_min, x_max, y_max]}, ...]}

struct CurateOutcome {
  std::string name;
  bool ok = false;
  std::string reason;
  double final_loss = 1.0;
  int iterations = 0;
};

struct CurateOptions {
  FitConfig fit;
  LiftConfig lift;
};

/// Lifts every annotated box at its mean depth and fits the camera pose to the annotations.
/// Returns the layout; throws Error (or ParseError) on any bad input.
inline Scene curate_scene(const png::Bytes& depth_png, const nlohmann::json& ann, const CurateOptions& opts,
                          FitResult* fit_out = nullptr) {
  const DepthMap depth = import_depth(depth_png);
  Camera cam = Camera::with_resolution(depth.width(), depth.height());
  if (!ann.is_object()) throw ParseError("annotation: expected an object");
  if (ann.contains("intrinsics")) {
    const auto& k = ann.at("intrinsics");
    cam.fx = k.at("fx").get<double>();
    cam.fy = k.at("fy").get<double>();
    cam.cx = k.at("cx").get<double>();
    cam.cy = k.at("cy").get<double>();
  }
  Scene scene;
  scene.camera = cam;
  scene.background_prompt = ann.value("background_prompt", std::string("background"));
  if (!ann.contains("objects") || !ann.at("objects").is_array() || ann.at("objects").empty())
    throw ParseError("annotation: objects must be a non-empty array");
  std::vector<OrientedBox> boxes;
  std::vector<Rect2D> rects;
  for (const auto& o : ann.at("objects")) {
    const auto id = o.at("id").get<std::string>();
    const auto& bb = o.at("bbox");
    if (!bb.is_array() || bb.size() != 4) throw ParseError("annotation: " + id + ".bbox needs 4 numbers");
    const Rect2D r{bb[0].get<double>(), bb[1].get<double>(), bb[2].get<double>(), bb[3].get<double>()};
    if (!(r.area() > 0.0)) throw Error("object " + id + ": zero-area box");
    OrientedBox b;
    try {
      b = lift_box(r, depth, cam, opts.lift);
    } catch (const Error& e) {
      throw Error("object " + id + ": " + e.what());
    }
    b.id = id;
    boxes.push_back(b);
    rects.push_back(r);
    scene.objects.push_back({b, o.at("prompt").get<std::string>()});
  }
  const auto fit = fit_camera(boxes, rects, cam, opts.fit);
  scene.camera = fit.camera;
  if (fit_out) *fit_out = fit;
  if (auto report = validate_scene(scene); !report.empty())
    throw Error("curated layout is invalid: " + format_report(report));
  return scene;
}

/// Curates every annotated pair in `in_dir` (sorted by name) into <out_dir>/<name>.layout.json
/// and writes <out_dir>/report.json. Per-scene failures are logged and skipped.
inline std::vector<CurateOutcome> curate_dir(const std::filesystem::path& in_dir,
                                             const std::filesystem::path& out_dir, const CurateOptions& opts,
                                             std::ostream& log) {
  namespace fs = std::filesystem;
  std::vector<fs::path> annotations;
  for (const auto& e : fs::directory_iterator(in_dir))
    if (e.path().extension() == ".json") annotations.push_back(e.path());
  std::sort(annotations.begin(), annotations.end());
  std::vector<CurateOutcome> outcomes;
  if (annotations.empty()) return outcomes;
  fs::create_directories(out_dir);

  nlohmann::json report = nlohmann::json::array();
  for (const auto& ann_path : annotations) {
    CurateOutcome out;
    out.name = ann_path.stem().string();
    try {
      auto png_path = ann_path;
      png_path.replace_extension(".png");
      std::ifstream png_in(png_path, std::ios::binary);
      if (!png_in) throw Error("missing depth map " + png_path.filename().string());
      const png::Bytes png(std::istreambuf_iterator<char>(png_in), {});
      std::ifstream ann_in(ann_path);
      auto ann = nlohmann::json::parse(ann_in, nullptr, false);
      if (ann.is_discarded()) throw ParseError("annotation is not valid JSON");
      FitResult fit;
      const Scene scene = curate_scene(png, ann, opts, &fit);
      std::ofstream(out_dir / (out.name + ".layout.json")) << save_layout(scene);
      out.ok = true;
      out.final_loss = fit.final_loss;
      out.iterations = fit.iterations;
      log << out.name << ": final_loss " << out.final_loss << ", iterations " << out.iterations << "\n";
    } catch (const nlohmann::json::exception& e) {
      out.reason = std::string("bad annotation: ") + e.what();
    } catch (const std::exception& e) {
      out.reason = e.what();
    }
    if (!out.ok) log << out.name << ": skipped (" << out.reason << ")\n";
    nlohmann::json entry{{"scene", out.name}, {"status", out.ok ? "ok" : "skipped"}};
    if (out.ok) {
      entry["final_loss"] = out.final_loss;
      entry["iterations"] = out.iterations;
    } else {
      entry["reason"] = out.reason;
    }
    report.push_back(entry);
    outcomes.push_back(out);
  }
  std::ofstream(out_dir / "report.json") << report.dump(2) << "\n";
  return outcomes;
}

}  // namespace poci
