#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace poci {

/// Row-major 2D grid.
template <class T>
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int w, int h, T fill = T{}) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {
    if (w < 0 || h < 0) throw std::invalid_argument("grid dimensions must be non-negative");
  }

  T& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  const T& at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Grid& o) const { return width == o.width && height == o.height; }

  friend bool operator==(const Grid&, const Grid&) = default;
};

/// Binary mask; cells hold 0 or 1.
using Mask = Grid<std::uint8_t>;

inline std::size_t count_ones(const Mask& m) {
  std::size_t n = 0;
  for (auto v : m.data) n += v != 0;
  return n;
}

inline Mask mask_union(const Mask& a, const Mask& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("mask shape mismatch");
  Mask out(a.width, a.height);
  for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = (a.data[i] | b.data[i]) ? 1 : 0;
  return out;
}

inline Mask mask_complement(const Mask& a) {
  Mask out(a.width, a.height);
  for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] ? 0 : 1;
  return out;
}

}  // namespace poci
