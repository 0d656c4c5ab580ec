#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>

namespace poci {

struct NelderMeadOptions {
  double diameter_tolerance = 1e-4;
  int max_iterations = 500;
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;
};

template <std::size_t N>
struct NelderMeadResult {
  std::array<double, N> x{};
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Derivative-free minimization of `f` over R^N. The initial simplex is x0 plus one vertex
/// per axis offset by `steps[i]`. Stops when the largest pairwise vertex distance falls below
/// the tolerance or after max_iterations. The returned point never scores worse than x0.
template <std::size_t N, class F>
NelderMeadResult<N> nelder_mead(F&& f, const std::array<double, N>& x0, const std::array<double, N>& steps,
                                const NelderMeadOptions& opts = {}) {
  using Point = std::array<double, N>;
  std::array<Point, N + 1> pts;
  std::array<double, N + 1> val;
  NelderMeadResult<N> res;

  auto eval = [&](const Point& p) {
    ++res.evaluations;
    return static_cast<double>(f(p));
  };

  pts[0] = x0;
  val[0] = eval(x0);
  for (std::size_t i = 0; i < N; ++i) {
    pts[i + 1] = x0;
    pts[i + 1][i] += steps[i];
    val[i + 1] = eval(pts[i + 1]);
  }

  auto diameter = [&] {
    double d = 0.0;
    for (std::size_t i = 0; i <= N; ++i)
      for (std::size_t j = i + 1; j <= N; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < N; ++k) s += (pts[i][k] - pts[j][k]) * (pts[i][k] - pts[j][k]);
        d = std::max(d, s);
      }
    return std::sqrt(d);
  };

  auto along = [](const Point& from, const Point& to, double t) {
    Point p;
    for (std::size_t k = 0; k < N; ++k) p[k] = from[k] + t * (to[k] - from[k]);
    return p;
  };

  std::array<std::size_t, N + 1> order;
  for (; res.iterations < opts.max_iterations; ++res.iterations) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    // stable: earlier vertices win ties, which keeps x0 best when nothing improves on it
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return val[a] < val[b]; });
    {
      auto p = pts;
      auto v = val;
      for (std::size_t i = 0; i <= N; ++i) {
        pts[i] = p[order[i]];
        val[i] = v[order[i]];
      }
    }
    if (diameter() < opts.diameter_tolerance) {
      res.converged = true;
      break;
    }

    Point centroid{};
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t k = 0; k < N; ++k) centroid[k] += pts[i][k] / static_cast<double>(N);

    const Point reflected = along(centroid, pts[N], -opts.reflection);
    const double fr = eval(reflected);
    if (fr < val[0]) {
      const Point expanded = along(centroid, pts[N], -opts.expansion);
      const double fe = eval(expanded);
      if (fe < fr) {
        pts[N] = expanded;
        val[N] = fe;
      } else {
        pts[N] = reflected;
        val[N] = fr;
      }
      continue;
    }
    if (fr < val[N - 1]) {
      pts[N] = reflected;
      val[N] = fr;
      continue;
    }
    const bool outside = fr < val[N];
    const Point contracted =
        outside ? along(centroid, reflected, opts.contraction) : along(centroid, pts[N], opts.contraction);
    const double fc = eval(contracted);
    if (fc < (outside ? fr : val[N])) {
      pts[N] = contracted;
      val[N] = fc;
      continue;
    }
    for (std::size_t i = 1; i <= N; ++i) {
      pts[i] = along(pts[0], pts[i], opts.shrink);
      val[i] = eval(pts[i]);
    }
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i <= N; ++i)
    if (val[i] < val[best]) best = i;
  res.x = pts[best];
  res.value = val[best];
  return res;
}

}  // namespace poci
