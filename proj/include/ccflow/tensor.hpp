#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ccflow/errors.hpp"

namespace ccflow {

// Dense rank-4 grid, batch x channels x height x width, C-contiguous.
struct Shape {
  int b = 0, c = 0, h = 0, w = 0;

  Shape() = default;
  Shape(int b_, int c_, int h_, int w_) : b(b_), c(c_), h(h_), w(w_) {}

  std::int64_t numel() const {
    return static_cast<std::int64_t>(b) * c * h * w;
  }
  bool operator==(const Shape& o) const { return b == o.b && c == o.c && h == o.h && w == o.w; }
  bool operator!=(const Shape& o) const { return !(*this == o); }

  std::string str() const {
    return "(" + std::to_string(b) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
  }
};

template <typename T>
struct Grid {
  Shape shape;
  std::vector<T> v;

  Grid() = default;
  explicit Grid(Shape s, T fill = T(0)) : shape(s), v(static_cast<size_t>(s.numel()), fill) {
    if (s.b < 1 || s.c < 1 || s.h < 1 || s.w < 1) throw ShapeError("grid dims must be >= 1, got " + s.str());
  }
  Grid(int b, int c, int h, int w, T fill = T(0)) : Grid(Shape(b, c, h, w), fill) {}

  std::int64_t numel() const { return shape.numel(); }
  bool empty() const { return v.empty(); }

  std::int64_t index(int b, int c, int y, int x) const {
    return ((static_cast<std::int64_t>(b) * shape.c + c) * shape.h + y) * shape.w + x;
  }
  T& at(int b, int c, int y, int x) { return v[static_cast<size_t>(index(b, c, y, x))]; }
  const T& at(int b, int c, int y, int x) const { return v[static_cast<size_t>(index(b, c, y, x))]; }

  T* plane(int b, int c) { return v.data() + index(b, c, 0, 0); }
  const T* plane(int b, int c) const { return v.data() + index(b, c, 0, 0); }

  void fill(T x) { std::fill(v.begin(), v.end(), x); }

  bool all_finite() const {
    for (const T& x : v) {
      if (!std::isfinite(static_cast<double>(x))) return false;
    }
    return true;
  }

  template <typename U>
  Grid<U> cast() const {
    Grid<U> out(shape);
    for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
    return out;
  }
};

// Deterministic uniform in [lo, hi). Own mapping from the raw engine so the
// stream does not depend on the standard library's distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    const std::uint64_t bits = eng_() >> 11;  // 53 random bits
    const double u = static_cast<double>(bits) * (1.0 / 9007199254740992.0);
    return lo + (hi - lo) * u;
  }
  // Integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<std::int64_t>(eng_() % span);
  }
  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

template <typename T>
Grid<T> random_grid(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Grid<T> g(s);
  for (auto& x : g.v) x = static_cast<T>(rng.uniform(lo, hi));
  return g;
}

}  // namespace ccflow
