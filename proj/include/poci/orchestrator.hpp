#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "poci/denoiser.hpp"
#include "poci/errors.hpp"
#include "poci/grid.hpp"
#include "poci/hash.hpp"
#include "poci/raster.hpp"
#include "poci/scene.hpp"
#include "poci/tensor.hpp"

namespace poci {

inline constexpr int kLatentDownsample = 8;
inline constexpr int kDefaultLatentChannels = 4;

enum class ExecutionMode { parallel, sequential };

inline const char* mode_name(ExecutionMode m) { return m == ExecutionMode::parallel ? "parallel" : "sequential"; }

struct Progress {
  std::string stage;  // "generate", "reference", "edit"
  int step = 0;       // completed steps
  int steps = 0;
};

struct GenerationConfig {
  int steps = 50;
  std::uint64_t seed = 0;
  bool use_background_path = true;
  bool two_stage = false;
  ExecutionMode mode = ExecutionMode::parallel;
  int latent_channels = kDefaultLatentChannels;
  double guidance = 7.5;
  // whole-timestep retries after a denoiser failure
  int timestep_retries = 2;
  std::function<void(const Progress&)> on_progress;
};

/// Latent grid of a camera: C x (height / 8) x (width / 8).
inline LatentShape latent_shape(const Camera& cam, int channels = kDefaultLatentChannels) {
  if (cam.width % kLatentDownsample != 0 || cam.height % kLatentDownsample != 0)
    throw ShapeError("image " + std::to_string(cam.width) + "x" + std::to_string(cam.height) +
                     " is not a multiple of the latent downsample factor " + std::to_string(kLatentDownsample));
  if (channels <= 0) throw ShapeError("latent channels must be positive");
  return {channels, cam.height / kLatentDownsample, cam.width / kLatentDownsample};
}

/// Standard-normal latent from a 64-bit seed, filled in (channel, row, column) order.
inline LatentTensor initial_noise(LatentShape shape, std::uint64_t seed) {
  LatentTensor z(shape);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (float& v : z.values()) v = static_cast<float>(normal(rng));
  return z;
}

struct BlendInput {
  const LatentTensor& latent;
  const Mask& mask;
};

namespace orch_detail {

inline void check_mask(const Mask& m, const LatentShape& shape, const char* what) {
  if (m.width != shape.width || m.height != shape.height)
    throw ShapeError(std::string(what) + ": mask " + std::to_string(m.width) + "x" + std::to_string(m.height) +
                     " does not match latent " + shape.to_string());
  for (auto v : m.data)
    if (v > 1) throw Error(std::string(what) + ": mask values must be 0 or 1");
}

// Copies the cells selected by `mask` from src into dst, across all channels.
inline void copy_masked(LatentTensor& dst, const LatentTensor& src, const Mask& mask) {
  const auto plane = dst.shape().plane();
  auto d = dst.values();
  auto s = src.values();
  for (std::size_t i = 0; i < plane; ++i) {
    if (!mask.data[i]) continue;
    for (int c = 0; c < dst.channels(); ++c) d[c * plane + i] = s[c * plane + i];
  }
}

inline void check_partition(const std::vector<const Mask*>& masks, const LatentShape& shape) {
  for (const Mask* m : masks) check_mask(*m, shape, "blend_latents");
  const auto plane = shape.plane();
  for (std::size_t i = 0; i < plane; ++i) {
    int n = 0;
    for (const Mask* m : masks) n += m->data[i];
    if (n != 1)
      throw Error("blend_latents: masks are not a partition; cell (" + std::to_string(i % shape.width) + ", " +
                  std::to_string(i / shape.width) + ") is covered by " + std::to_string(n) + " paths");
  }
}

}  // namespace orch_detail

/// Merges per-path predictions: each cell takes the value of the single path whose mask
/// covers it. Masks must be binary and partition the latent grid.
inline LatentTensor blend_latents(std::span<const BlendInput> inputs) {
  if (inputs.empty()) throw Error("blend_latents: no predictions");
  const LatentShape shape = inputs.front().latent.shape();
  std::vector<const Mask*> masks;
  for (const auto& in : inputs) {
    if (in.latent.shape() != shape)
      throw ShapeError("blend_latents: prediction shape " + in.latent.shape().to_string() + " differs from " +
                       shape.to_string());
    masks.push_back(&in.mask);
  }
  orch_detail::check_partition(masks, shape);
  LatentTensor out(shape);
  for (const auto& in : inputs) orch_detail::copy_masked(out, in.latent, in.mask);
  return out;
}

inline LatentTensor blend_latents(std::initializer_list<BlendInput> inputs) {
  return blend_latents(std::span<const BlendInput>(inputs.begin(), inputs.size()));
}

/// m_obj ? prediction : z_img, per cell.
inline LatentTensor inpaint_blend(const LatentTensor& prediction, const Mask& m_obj, const LatentTensor& z_img) {
  if (prediction.shape() != z_img.shape())
    throw ShapeError("inpaint_blend: prediction " + prediction.shape().to_string() + " vs image latent " +
                     z_img.shape().to_string());
  orch_detail::check_mask(m_obj, prediction.shape(), "inpaint_blend");
  LatentTensor out = z_img;
  orch_detail::copy_masked(out, prediction, m_obj);
  return out;
}

/// Per-channel mean of a latent over a mask; nothing when the mask is empty.
inline std::optional<std::vector<float>> region_signature(const LatentTensor& latent, const Mask& mask) {
  orch_detail::check_mask(mask, latent.shape(), "region_signature");
  const std::size_t n = count_ones(mask);
  if (n == 0) return std::nullopt;
  const auto plane = latent.shape().plane();
  std::vector<float> sig(static_cast<std::size_t>(latent.channels()));
  for (int c = 0; c < latent.channels(); ++c) {
    double sum = 0.0;
    for (std::size_t i = 0; i < plane; ++i)
      if (mask.data[i]) sum += latent.values()[c * plane + i];
    sig[c] = static_cast<float>(sum / static_cast<double>(n));
  }
  return sig;
}

/// Content key of a latent: fnv1a64 of its payload, as 16 hex digits.
inline std::string latent_key(const LatentTensor& latent) { return hex64(fnv1a64(latent_payload(latent))); }

inline std::string reference_id_for(const LatentTensor& source, const std::string& object_id) {
  return latent_key(source) + ":" + object_id;
}

struct EditMaskTriple {
  Mask m_add;
  Mask m_rem;
  Mask m_pres;

  Mask active() const { return mask_union(m_add, m_rem); }
  friend bool operator==(const EditMaskTriple&, const EditMaskTriple&) = default;
};

/// Occlusion-aware latent-resolution masks of one scene.
inline MaskSet latent_masks(const Scene& scene, const RenderOptions& opts = {}) {
  latent_shape(scene.camera);
  return downsample_masks(render_layout(scene, opts), kLatentDownsample);
}

/// Masks for moving, adding or removing one box within `scene`. Each box is rendered in the
/// context of the other objects of `scene` (replacing the object with the same id, or appended
/// when absent). Cells claimed by both resolve to m_add.
inline EditMaskTriple make_edit_masks(const std::optional<OrientedBox>& old_box,
                                      const std::optional<OrientedBox>& new_box, const Scene& scene) {
  if (!old_box && !new_box) throw EditError("make_edit_masks: both boxes absent");
  const LatentShape shape = latent_shape(scene.camera, 1);
  auto region = [&](const std::optional<OrientedBox>& box) {
    if (!box) return Mask(shape.width, shape.height);
    Scene s = scene;
    if (auto i = s.index_of(box->id)) {
      s.objects[*i].box = *box;
    } else {
      s.objects.push_back({*box, ""});
    }
    return latent_masks(s).object_mask(box->id);
  };
  EditMaskTriple t{region(new_box), region(old_box), {}};
  for (std::size_t i = 0; i < t.m_rem.size(); ++i)
    if (t.m_add.data[i]) t.m_rem.data[i] = 0;
  t.m_pres = mask_complement(t.active());
  return t;
}

struct GenerationResult {
  LatentTensor latent;
  // first-stage output when two_stage is on
  std::optional<LatentTensor> reference;
};

/// Runs blended multi-path denoising against a denoiser. Reference signatures used for
/// identity conditioning are published to `references`, which the denoiser must read from.
class Orchestrator {
 public:
  Orchestrator(Denoiser& denoiser, std::shared_ptr<ReferenceStore> references)
      : denoiser_(denoiser), references_(std::move(references)) {}

  Denoiser& denoiser() const { return denoiser_; }
  ReferenceStore& references() const { return *references_; }

  /// One path per object plus the background path. With two_stage on, a first pass yields a
  /// reference latent whose per-object region signatures condition the second pass. Both
  /// passes start from the same noise.
  GenerationResult generate_scene(const Scene& scene, const GenerationConfig& cfg) const {
    check_inputs(scene, cfg);
    const LatentShape shape = latent_shape(scene.camera, cfg.latent_channels);
    const auto render = render_layout(scene);
    const auto masks = downsample_masks(render, kLatentDownsample);
    auto control = std::make_shared<const DepthControl>(render.depth);
    const auto noise = initial_noise(shape, cfg.seed);

    if (!cfg.two_stage) return {run_generation(scene, masks, control, noise, {}, cfg, "generate"), std::nullopt};

    auto reference = run_generation(scene, masks, control, noise, {}, cfg, "reference");
    std::map<std::string, std::string> refs = publish_signatures(reference, masks, scene);
    auto latent = run_generation(scene, masks, control, noise, refs, cfg, "generate");
    return {std::move(latent), std::move(reference)};
  }

  /// Regenerates only the regions touched by the edits that turn old_scene into new_scene,
  /// keeping every other latent cell bit-identical to z_img. Moved objects are conditioned on
  /// their old region of `reference_source` (z_img when absent). Camera changes are rejected;
  /// see regenerate_with_references.
  LatentTensor edit_apply(const Scene& old_scene, const Scene& new_scene, const LatentTensor& z_img,
                          const GenerationConfig& cfg,
                          const std::optional<LatentTensor>& reference_source = std::nullopt) const {
    check_inputs(new_scene, cfg);
    const LatentShape shape = latent_shape(new_scene.camera, cfg.latent_channels);
    if (z_img.shape() != shape)
      throw ShapeError("edit_apply: image latent " + z_img.shape().to_string() + " does not match " +
                       shape.to_string());
    const auto edits = diff_scenes(old_scene, new_scene);
    std::set<std::string> moved, renamed, added, removed;
    for (const auto& e : edits) {
      if (std::holds_alternative<edit::SetCamera>(e))
        throw EditError("edit_apply: camera changes require full regeneration (regenerate_with_references)");
      if (auto* t = std::get_if<edit::TransformObject>(&e)) moved.insert(t->id);
      if (auto* r = std::get_if<edit::ReplaceObject>(&e)) renamed.insert(r->id);
      if (auto* a = std::get_if<edit::AddObject>(&e)) added.insert(a->object.box.id);
      if (auto* r = std::get_if<edit::RemoveObject>(&e)) removed.insert(r->id);
    }
    if (edits.empty()) return z_img;

    const auto new_render = render_layout(new_scene);
    const auto new_masks = downsample_masks(new_render, kLatentDownsample);
    const auto old_masks = latent_masks(old_scene);
    auto control = std::make_shared<const DepthControl>(new_render.depth);
    const LatentTensor& ref_src = reference_source ? *reference_source : z_img;
    if (ref_src.shape() != shape) throw ShapeError("edit_apply: reference latent shape mismatch");

    std::vector<Path> paths;
    Mask add_union(shape.width, shape.height);
    for (const auto& o : new_scene.objects) {
      const auto& id = o.box.id;
      if (!moved.count(id) && !renamed.count(id) && !added.count(id)) continue;
      Path p{"add:" + id, {o.prompt, control, std::nullopt, cfg.guidance}, new_masks.object_mask(id)};
      if (moved.count(id) && !renamed.count(id) && !added.count(id)) {
        if (auto sig = region_signature(ref_src, old_masks.object_mask(id))) {
          const auto rid = reference_id_for(ref_src, id);
          references_->put(rid, std::move(*sig));
          p.conditioning.reference_id = rid;
        }
      }
      add_union = mask_union(add_union, p.mask);
      paths.push_back(std::move(p));
    }
    Mask rem(shape.width, shape.height);
    for (const auto& o : old_scene.objects) {
      const auto& id = o.box.id;
      if (!moved.count(id) && !renamed.count(id) && !removed.count(id)) continue;
      rem = mask_union(rem, old_masks.object_mask(id));
    }
    for (std::size_t i = 0; i < rem.size(); ++i)
      if (add_union.data[i]) rem.data[i] = 0;
    paths.push_back({"rem", {new_scene.background_prompt, control, std::nullopt, cfg.guidance}, rem});

    const Mask active = mask_union(add_union, rem);
    const Mask pres = mask_complement(active);
    const auto init = inpaint_blend(initial_noise(shape, cfg.seed), active, z_img);
    return run(paths, &pres, init, &z_img, &active, cfg, "edit");
  }

  /// Full regeneration of new_scene (typically after a camera change) where each object that
  /// also exists in old_scene is conditioned on its old region of `reference_source`.
  LatentTensor regenerate_with_references(const Scene& old_scene, const Scene& new_scene,
                                          const LatentTensor& reference_source, const GenerationConfig& cfg) const {
    check_inputs(new_scene, cfg);
    const LatentShape shape = latent_shape(new_scene.camera, cfg.latent_channels);
    if (reference_source.shape() != latent_shape(old_scene.camera, cfg.latent_channels))
      throw ShapeError("regenerate_with_references: reference latent shape mismatch");
    const auto old_masks = latent_masks(old_scene);
    std::map<std::string, std::string> refs;
    for (const auto& o : new_scene.objects) {
      if (!old_scene.find(o.box.id)) continue;
      if (auto sig = region_signature(reference_source, old_masks.object_mask(o.box.id))) {
        const auto rid = reference_id_for(reference_source, o.box.id);
        references_->put(rid, std::move(*sig));
        refs[o.box.id] = rid;
      }
    }
    const auto render = render_layout(new_scene);
    const auto masks = downsample_masks(render, kLatentDownsample);
    auto control = std::make_shared<const DepthControl>(render.depth);
    return run_generation(new_scene, masks, control, initial_noise(shape, cfg.seed), refs, cfg, "generate");
  }

  /// Routes a scene change: camera changes regenerate with references, anything else is an
  /// in-place edit.
  LatentTensor apply_change(const Scene& old_scene, const Scene& new_scene, const LatentTensor& z_img,
                            const GenerationConfig& cfg,
                            const std::optional<LatentTensor>& reference_source = std::nullopt) const {
    if (old_scene.camera != new_scene.camera)
      return regenerate_with_references(old_scene, new_scene, reference_source ? *reference_source : z_img, cfg);
    return edit_apply(old_scene, new_scene, z_img, cfg, reference_source);
  }

 private:
  struct Path {
    std::string id;
    Conditioning conditioning;
    Mask mask;
  };

  static void check_inputs(const Scene& scene, const GenerationConfig& cfg) {
    if (cfg.steps < 1) throw Error("generation config: steps must be at least 1");
    if (!(cfg.guidance >= 0.0)) throw Error("generation config: guidance must be non-negative");
    if (auto report = validate_scene(scene); !report.empty())
      throw Error("invalid scene: " + format_report(report));
  }

  std::map<std::string, std::string> publish_signatures(const LatentTensor& reference, const MaskSet& masks,
                                                        const Scene& scene) const {
    std::map<std::string, std::string> refs;
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
      const auto& id = scene.objects[i].box.id;
      if (auto sig = region_signature(reference, masks.object_mask(i))) {
        const auto rid = reference_id_for(reference, id);
        references_->put(rid, std::move(*sig));
        refs[id] = rid;
      }
    }
    return refs;
  }

  LatentTensor run_generation(const Scene& scene, const MaskSet& masks,
                              const std::shared_ptr<const DepthControl>& control, const LatentTensor& noise,
                              const std::map<std::string, std::string>& refs, const GenerationConfig& cfg,
                              const std::string& stage) const {
    std::vector<Path> paths;
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
      const auto& o = scene.objects[i];
      std::optional<std::string> rid;
      if (auto it = refs.find(o.box.id); it != refs.end()) rid = it->second;
      paths.push_back({"object:" + o.box.id, {o.prompt, control, rid, cfg.guidance}, masks.object_mask(i)});
    }
    Mask background = masks.background_mask();
    if (cfg.use_background_path) {
      paths.push_back({"background", {scene.background_prompt, control, std::nullopt, cfg.guidance}, background});
      return run(paths, nullptr, noise, nullptr, nullptr, cfg, stage);
    }
    // background cells carry the current latent through unchanged
    return run(paths, &background, noise, nullptr, nullptr, cfg, stage);
  }

  // Each step: every path predicts from the shared latent z; the next latent takes each
  // path's prediction on its mask and z itself on `carry`. With `clamp_to`, cells outside
  // `active` are then reset to clamp_to.
  LatentTensor run(const std::vector<Path>& paths, const Mask* carry, LatentTensor z, const LatentTensor* clamp_to,
                   const Mask* active, const GenerationConfig& cfg, const std::string& stage) const {
    {
      std::vector<const Mask*> masks;
      for (const auto& p : paths) masks.push_back(&p.mask);
      if (carry) masks.push_back(carry);
      orch_detail::check_partition(masks, z.shape());
    }
    std::vector<std::uint64_t> seeds;
    for (const auto& p : paths) seeds.push_back(splitmix64(cfg.seed ^ fnv1a64(p.id)));

    for (int t = 0; t < cfg.steps; ++t) {
      LatentTensor next;
      for (int attempt = 0;; ++attempt) {
        try {
          next = cfg.mode == ExecutionMode::parallel ? step_parallel(paths, seeds, carry, z, t)
                                                     : step_sequential(paths, seeds, carry, z, t);
          break;
        } catch (const DenoiserError&) {
          if (attempt >= cfg.timestep_retries) throw;
        }
      }
      if (clamp_to) next = inpaint_blend(next, *active, *clamp_to);
      z = std::move(next);
      if (cfg.on_progress) cfg.on_progress({stage, t + 1, cfg.steps});
    }
    return z;
  }

  LatentTensor step_parallel(const std::vector<Path>& paths, const std::vector<std::uint64_t>& seeds,
                             const Mask* carry, const LatentTensor& z, int t) const {
    std::vector<PathStep> calls;
    calls.reserve(paths.size());
    for (std::size_t i = 0; i < paths.size(); ++i)
      calls.push_back({paths[i].id, t, z, paths[i].conditioning, seeds[i]});
    std::vector<LatentTensor> preds;
    preds.reserve(paths.size());
    const std::size_t chunk = static_cast<std::size_t>(std::max(1, denoiser_.max_batch()));
    for (std::size_t b = 0; b < calls.size(); b += chunk) {
      const auto n = std::min(chunk, calls.size() - b);
      auto out = denoiser_.step_batch(std::span<const PathStep>(calls.data() + b, n));
      if (out.size() != n) throw DenoiserError("batch returned " + std::to_string(out.size()) + " results", "*", t);
      for (auto& o : out) preds.push_back(std::move(o));
    }
    std::vector<BlendInput> inputs;
    for (std::size_t i = 0; i < paths.size(); ++i) {
      check_prediction(preds[i], z, paths[i].id, t);
      inputs.push_back({preds[i], paths[i].mask});
    }
    if (carry) inputs.push_back({z, *carry});
    return blend_latents(inputs);
  }

  // One path at a time; each prediction is folded into the output and dropped immediately.
  LatentTensor step_sequential(const std::vector<Path>& paths, const std::vector<std::uint64_t>& seeds,
                               const Mask* carry, const LatentTensor& z, int t) const {
    LatentTensor next(z.shape());
    for (std::size_t i = 0; i < paths.size(); ++i) {
      auto pred = denoiser_.step({paths[i].id, t, z, paths[i].conditioning, seeds[i]});
      check_prediction(pred, z, paths[i].id, t);
      orch_detail::copy_masked(next, pred, paths[i].mask);
    }
    if (carry) orch_detail::copy_masked(next, z, *carry);
    return next;
  }

  static void check_prediction(const LatentTensor& pred, const LatentTensor& z, const std::string& path, int t) {
    if (pred.shape() != z.shape())
      throw DenoiserError("prediction shape " + pred.shape().to_string() + " differs from input " +
                          z.shape().to_string(),
                          path, t);
    if (!pred.all_finite()) throw DenoiserError("prediction contains non-finite values", path, t);
  }

  Denoiser& denoiser_;
  std::shared_ptr<ReferenceStore> references_;
};

}  // namespace poci
