#pragma once

// Shared generators and independent oracles for the test suites.

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "poci/grid.hpp"
#include "poci/scene.hpp"
#include "poci/tensor.hpp"

namespace poci::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline Camera make_camera(int w, int h, double f) {
  Camera c = Camera::with_resolution(w, h);
  c.fx = c.fy = f;
  c.cx = w / 2.0;
  c.cy = h / 2.0;
  return c;
}

/// Random box in front of a camera at the origin looking along +Z.
inline OrientedBox random_box(Rng& rng, const std::string& id) {
  OrientedBox b;
  b.id = id;
  b.center = {uniform(rng, -2.0, 2.0), uniform(rng, -1.5, 1.5), uniform(rng, 4.0, 12.0)};
  b.size = {uniform(rng, 0.3, 2.0), uniform(rng, 0.3, 2.0), uniform(rng, 0.3, 2.0)};
  b.yaw = uniform(rng, -pi, pi);
  if (b.yaw >= pi) b.yaw = -pi;
  return b;
}

inline Scene random_scene(Rng& rng, int w, int h, int min_boxes, int max_boxes) {
  Scene s;
  s.camera = make_camera(w, h, w * uniform(rng, 0.8, 1.2));
  s.background_prompt = "an empty room";
  const int n = uniform_int(rng, min_boxes, max_boxes);
  for (int i = 0; i < n; ++i) s.objects.push_back({random_box(rng, "obj" + std::to_string(i)), "prompt " + std::to_string(i)});
  return s;
}

// Rotation matrices written out directly, independent of the engine's basis helpers.
using Mat3 = std::array<std::array<double, 3>, 3>;

inline Mat3 mul(const Mat3& a, const Mat3& b) {
  Mat3 m{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) m[i][j] += a[i][k] * b[k][j];
  return m;
}
inline std::array<double, 3> apply(const Mat3& m, const std::array<double, 3>& v) {
  return {m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2], m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
          m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]};
}
inline Mat3 transpose(const Mat3& m) {
  Mat3 t;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) t[i][j] = m[j][i];
  return t;
}
inline Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {{{c, 0, s}, {0, 1, 0}, {-s, 0, c}}};
}
inline Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {{{1, 0, 0}, {0, c, -s}, {0, s, c}}};
}
// camera-to-world: pitch tilts forward toward +Y, then yaw turns about +Y
inline Mat3 camera_to_world(const Camera& cam) { return mul(rot_y(cam.yaw), rot_x(-cam.pitch)); }

struct OracleRender {
  Grid<double> depth;
  Grid<std::uint16_t> labels;
};

/// Nearest-hit oracle: intersects each pixel ray with all six face planes of every box and
/// keeps the closest face hit whose point lies inside the face rectangle.
inline OracleRender oracle_render(const Scene& scene, double far = 100.0) {
  const Camera& cam = scene.camera;
  const Mat3 c2w = camera_to_world(cam);
  OracleRender out{Grid<double>(cam.width, cam.height, far), Grid<std::uint16_t>(cam.width, cam.height, 0)};
  const std::array<double, 3> origin{cam.position.x, cam.position.y, cam.position.z};
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const std::array<double, 3> d_cam{(x + 0.5 - cam.cx) / cam.fx, -(y + 0.5 - cam.cy) / cam.fy, 1.0};
      const auto d = apply(c2w, d_cam);
      double best = far;
      std::uint16_t label = 0;
      for (std::size_t k = 0; k < scene.objects.size(); ++k) {
        const auto& b = scene.objects[k].box;
        const Mat3 w2l = transpose(rot_y(b.yaw));
        const auto o = apply(w2l, {origin[0] - b.center.x, origin[1] - b.center.y, origin[2] - b.center.z});
        const auto dl = apply(w2l, d);
        const double half[3] = {b.size.x / 2, b.size.y / 2, b.size.z / 2};
        for (int a = 0; a < 3; ++a)
          for (double sign : {-1.0, 1.0}) {
            if (dl[a] == 0.0) continue;
            const double t = (sign * half[a] - o[a]) / dl[a];
            if (!(t > 0.0)) continue;
            bool inside = true;
            for (int q = 0; q < 3; ++q) {
              if (q == a) continue;
              const double p = o[q] + t * dl[q];
              if (std::fabs(p) > half[q] * (1 + 1e-12)) inside = false;
            }
            // t is the camera-space depth since the camera-space direction has z = 1
            if (inside && t < best) {
              best = t;
              label = static_cast<std::uint16_t>(k + 1);
            }
          }
      }
      out.depth.at(x, y) = best;
      out.labels.at(x, y) = label;
    }
  return out;
}

/// Majority-vote downsampling recomputed with a per-cell histogram.
inline Grid<std::uint16_t> oracle_downsample(const Grid<std::uint16_t>& labels, const Grid<double>& depth, int f) {
  Grid<std::uint16_t> out(labels.width / f, labels.height / f);
  for (int cy = 0; cy < out.height; ++cy)
    for (int cx = 0; cx < out.width; ++cx) {
      std::map<int, std::pair<int, double>> hist;  // label -> (count, depth sum)
      for (int y = 0; y < f; ++y)
        for (int x = 0; x < f; ++x) {
          auto& e = hist[labels.at(cx * f + x, cy * f + y)];
          e.first += 1;
          e.second += depth.at(cx * f + x, cy * f + y);
        }
      int best_count = 0;
      for (auto& [l, e] : hist) best_count = std::max(best_count, e.first);
      int winner = -1;
      double winner_depth = 0;
      for (auto& [l, e] : hist) {
        if (e.first != best_count) continue;
        if (l == 0 && hist.size() > 1) {
          bool object_tied = false;
          for (auto& [l2, e2] : hist)
            if (l2 != 0 && e2.first == best_count) object_tied = true;
          if (object_tied) continue;
        }
        const double mean = e.second / e.first;
        if (winner < 0 || mean < winner_depth) {
          winner = l;
          winner_depth = mean;
        }
      }
      out.at(cx, cy) = static_cast<std::uint16_t>(winner);
    }
  return out;
}

inline Mask random_mask(Rng& rng, int w, int h, double p = 0.5) {
  Mask m(w, h);
  std::bernoulli_distribution bit(p);
  for (auto& v : m.data) v = bit(rng) ? 1 : 0;
  return m;
}

inline LatentTensor random_latent(Rng& rng, LatentShape shape) {
  LatentTensor t(shape);
  std::normal_distribution<float> n(0.0f, 1.0f);
  for (auto& v : t.values()) v = n(rng);
  return t;
}

}  // namespace poci::testing
