#pragma once

// Raw dense-grid compute kernels (forward + backward). No graph bookkeeping
// here; the autograd tape in tape.hpp wraps these. All kernels are
// single-threaded and deterministic; concurrency happens at the
// sample/batch level above.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ccflow/tensor.hpp"

namespace ccflow::kernels {

// C[m,n] += A[m,k] * B[k,n], row-major. The k-unrolled axpy form keeps the
// accumulator row in registers/cache and vectorizes on the j loop.
template <typename T>
void gemm_nn(int m, int n, int k, const T* a, const T* b, T* c) {
  for (int i = 0; i < m; ++i) {
    T* ci = c + static_cast<std::int64_t>(i) * n;
    const T* ai = a + static_cast<std::int64_t>(i) * k;
    int p = 0;
    for (; p + 4 <= k; p += 4) {
      const T a0 = ai[p], a1 = ai[p + 1], a2 = ai[p + 2], a3 = ai[p + 3];
      const T* b0 = b + static_cast<std::int64_t>(p) * n;
      const T* b1 = b0 + n;
      const T* b2 = b1 + n;
      const T* b3 = b2 + n;
      for (int j = 0; j < n; ++j) ci[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
    }
    for (; p < k; ++p) {
      const T ap = ai[p];
      const T* bp = b + static_cast<std::int64_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += ap * bp[j];
    }
  }
}

template <typename T>
void transpose(int rows, int cols, const T* src, T* dst) {
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) dst[static_cast<std::int64_t>(j) * rows + i] = src[static_cast<std::int64_t>(i) * cols + j];
}

struct ConvGeom {
  int in_h, in_w, out_h, out_w;
  int kernel, stride;
  int pad_top, pad_left;
};

// "Same" geometry: out = ceil(in / stride), padding split with the smaller
// half in front (TF convention).
inline ConvGeom same_geometry(int in_h, int in_w, int kernel, int stride) {
  ConvGeom g;
  g.in_h = in_h;
  g.in_w = in_w;
  g.kernel = kernel;
  g.stride = stride;
  g.out_h = (in_h + stride - 1) / stride;
  g.out_w = (in_w + stride - 1) / stride;
  const int pad_h = std::max((g.out_h - 1) * stride + kernel - in_h, 0);
  const int pad_w = std::max((g.out_w - 1) * stride + kernel - in_w, 0);
  g.pad_top = pad_h / 2;
  g.pad_left = pad_w / 2;
  return g;
}

// col is (c_in*k*k) x (out_h*out_w).
template <typename T>
void im2col(const T* src, int c_in, const ConvGeom& g, T* col) {
  const int k = g.kernel;
  const std::int64_t plane = static_cast<std::int64_t>(g.in_h) * g.in_w;
  const int n_sp = g.out_h * g.out_w;
  std::int64_t row = 0;
  for (int ci = 0; ci < c_in; ++ci) {
    const T* sp = src + ci * plane;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, ++row) {
        T* out = col + row * n_sp;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int y = oy * g.stride + ky - g.pad_top;
          T* orow = out + static_cast<std::int64_t>(oy) * g.out_w;
          if (y < 0 || y >= g.in_h) {
            std::fill(orow, orow + g.out_w, T(0));
            continue;
          }
          const T* srow = sp + static_cast<std::int64_t>(y) * g.in_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int x = ox * g.stride + kx - g.pad_left;
            orow[ox] = (x >= 0 && x < g.in_w) ? srow[x] : T(0);
          }
        }
      }
    }
  }
}

// Scatter-add inverse of im2col.
template <typename T>
void col2im_add(const T* col, int c_in, const ConvGeom& g, T* dst) {
  const int k = g.kernel;
  const std::int64_t plane = static_cast<std::int64_t>(g.in_h) * g.in_w;
  const int n_sp = g.out_h * g.out_w;
  std::int64_t row = 0;
  for (int ci = 0; ci < c_in; ++ci) {
    T* dp = dst + ci * plane;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, ++row) {
        const T* in = col + row * n_sp;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int y = oy * g.stride + ky - g.pad_top;
          if (y < 0 || y >= g.in_h) continue;
          const T* irow = in + static_cast<std::int64_t>(oy) * g.out_w;
          T* drow = dp + static_cast<std::int64_t>(y) * g.in_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int x = ox * g.stride + kx - g.pad_left;
            if (x >= 0 && x < g.in_w) drow[x] += irow[ox];
          }
        }
      }
    }
  }
}

// Cross-correlation with "same" zero padding. weights: (c_out, c_in, k, k).
template <typename T>
Grid<T> conv2d_forward(const Grid<T>& input, const Grid<T>& weights, const Grid<T>* bias, int stride) {
  const int c_in = input.shape.c;
  const int c_out = weights.shape.b;
  if (weights.shape.c != c_in)
    throw ShapeError("conv2d: input channels " + std::to_string(c_in) + " vs weight channels " +
                     std::to_string(weights.shape.c));
  if (weights.shape.h != weights.shape.w) throw ShapeError("conv2d: non-square kernel");
  const int k = weights.shape.h;
  const ConvGeom g = same_geometry(input.shape.h, input.shape.w, k, stride);
  const int n_sp = g.out_h * g.out_w;
  const int k_col = c_in * k * k;

  Grid<T> out(input.shape.b, c_out, g.out_h, g.out_w);
  std::vector<T> col(static_cast<size_t>(k_col) * n_sp);
  for (int b = 0; b < input.shape.b; ++b) {
    im2col(input.plane(b, 0), c_in, g, col.data());
    T* ob = out.plane(b, 0);
    if (bias) {
      for (int co = 0; co < c_out; ++co) std::fill(ob + static_cast<std::int64_t>(co) * n_sp, ob + static_cast<std::int64_t>(co + 1) * n_sp, bias->v[co]);
    }
    gemm_nn(c_out, n_sp, k_col, weights.v.data(), col.data(), ob);
  }
  return out;
}

template <typename T>
void conv2d_backward(const Grid<T>& input, const Grid<T>& weights, int stride, const Grid<T>& grad_out,
                     Grid<T>* grad_input, Grid<T>* grad_weights, Grid<T>* grad_bias) {
  const int c_in = input.shape.c;
  const int c_out = weights.shape.b;
  const int k = weights.shape.h;
  const ConvGeom g = same_geometry(input.shape.h, input.shape.w, k, stride);
  const int n_sp = g.out_h * g.out_w;
  const int k_col = c_in * k * k;

  std::vector<T> col(static_cast<size_t>(k_col) * n_sp);
  std::vector<T> col_t(static_cast<size_t>(k_col) * n_sp);
  std::vector<T> w_t;
  if (grad_input) {
    w_t.resize(static_cast<size_t>(k_col) * c_out);
    transpose(c_out, k_col, weights.v.data(), w_t.data());
  }
  std::vector<T> gcol(static_cast<size_t>(k_col) * n_sp);

  for (int b = 0; b < input.shape.b; ++b) {
    const T* go = grad_out.plane(b, 0);
    if (grad_bias) {
      for (int co = 0; co < c_out; ++co) {
        T s = 0;
        const T* row = go + static_cast<std::int64_t>(co) * n_sp;
        for (int j = 0; j < n_sp; ++j) s += row[j];
        grad_bias->v[co] += s;
      }
    }
    if (grad_weights) {
      im2col(input.plane(b, 0), c_in, g, col.data());
      transpose(k_col, n_sp, col.data(), col_t.data());
      gemm_nn(c_out, k_col, n_sp, go, col_t.data(), grad_weights->v.data());
    }
    if (grad_input) {
      std::fill(gcol.begin(), gcol.end(), T(0));
      gemm_nn(k_col, n_sp, c_out, w_t.data(), go, gcol.data());
      col2im_add(gcol.data(), c_in, g, grad_input->plane(b, 0));
    }
  }
}

// Fractionally strided convolution, defined as the exact adjoint of
// conv2d_forward for the geometry (h*stride, w*stride) -> (h, w).
// weights: (c_in, c_out, k, k).
template <typename T>
Grid<T> conv_transpose2d_forward(const Grid<T>& input, const Grid<T>& weights, const Grid<T>* bias, int stride) {
  const int c_in = input.shape.c;
  if (weights.shape.b != c_in)
    throw ShapeError("conv_transpose2d: input channels " + std::to_string(c_in) + " vs weight dim " +
                     std::to_string(weights.shape.b));
  const int c_out = weights.shape.c;
  const int k = weights.shape.h;
  const int out_h = input.shape.h * stride;
  const int out_w = input.shape.w * stride;
  const ConvGeom g = same_geometry(out_h, out_w, k, stride);
  const int n_sp = g.out_h * g.out_w;  // equals input spatial size
  const int k_col = c_out * k * k;

  Grid<T> out(input.shape.b, c_out, out_h, out_w);
  std::vector<T> w_t(static_cast<size_t>(k_col) * c_in);
  transpose(c_in, k_col, weights.v.data(), w_t.data());
  std::vector<T> gcol(static_cast<size_t>(k_col) * n_sp);
  for (int b = 0; b < input.shape.b; ++b) {
    std::fill(gcol.begin(), gcol.end(), T(0));
    gemm_nn(k_col, n_sp, c_in, w_t.data(), input.plane(b, 0), gcol.data());
    col2im_add(gcol.data(), c_out, g, out.plane(b, 0));
    if (bias) {
      T* ob = out.plane(b, 0);
      const std::int64_t plane = static_cast<std::int64_t>(out_h) * out_w;
      for (int co = 0; co < c_out; ++co)
        for (std::int64_t j = 0; j < plane; ++j) ob[co * plane + j] += bias->v[co];
    }
  }
  return out;
}

template <typename T>
void conv_transpose2d_backward(const Grid<T>& input, const Grid<T>& weights, int stride, const Grid<T>& grad_out,
                               Grid<T>* grad_input, Grid<T>* grad_weights, Grid<T>* grad_bias) {
  const int c_in = input.shape.c;
  const int c_out = weights.shape.c;
  const int k = weights.shape.h;
  const ConvGeom g = same_geometry(grad_out.shape.h, grad_out.shape.w, k, stride);
  const int n_sp = g.out_h * g.out_w;
  const int k_col = c_out * k * k;

  std::vector<T> col(static_cast<size_t>(k_col) * n_sp);
  std::vector<T> col_t;
  if (grad_weights) col_t.resize(static_cast<size_t>(k_col) * n_sp);
  for (int b = 0; b < input.shape.b; ++b) {
    im2col(grad_out.plane(b, 0), c_out, g, col.data());
    if (grad_input) gemm_nn(c_in, n_sp, k_col, weights.v.data(), col.data(), grad_input->plane(b, 0));
    if (grad_weights) {
      transpose(k_col, n_sp, col.data(), col_t.data());
      gemm_nn(c_in, k_col, n_sp, input.plane(b, 0), col_t.data(), grad_weights->v.data());
    }
    if (grad_bias) {
      const T* go = grad_out.plane(b, 0);
      const std::int64_t plane = static_cast<std::int64_t>(grad_out.shape.h) * grad_out.shape.w;
      for (int co = 0; co < c_out; ++co) {
        T s = 0;
        for (std::int64_t j = 0; j < plane; ++j) s += go[co * plane + j];
        grad_bias->v[co] += s;
      }
    }
  }
}

template <typename T>
struct GroupNormStats {
  std::vector<T> mean;     // per (batch, group)
  std::vector<T> inv_std;  // 1/sqrt(var + eps)
};

template <typename T>
Grid<T> group_norm_forward(const Grid<T>& input, int num_groups, const Grid<T>& gamma, const Grid<T>& beta, T eps,
                           GroupNormStats<T>* stats) {
  const int c = input.shape.c;
  if (c % num_groups != 0)
    throw ConfigError("group_norm: channels " + std::to_string(c) + " not divisible by groups " +
                      std::to_string(num_groups));
  const int cg = c / num_groups;
  const std::int64_t plane = static_cast<std::int64_t>(input.shape.h) * input.shape.w;
  const std::int64_t n = cg * plane;

  Grid<T> out(input.shape);
  if (stats) {
    stats->mean.assign(static_cast<size_t>(input.shape.b) * num_groups, T(0));
    stats->inv_std.assign(static_cast<size_t>(input.shape.b) * num_groups, T(0));
  }
  for (int b = 0; b < input.shape.b; ++b) {
    for (int g = 0; g < num_groups; ++g) {
      const T* src = input.plane(b, g * cg);
      T sum = 0, sq = 0;
      for (std::int64_t i = 0; i < n; ++i) {
        sum += src[i];
        sq += src[i] * src[i];
      }
      const T mu = sum / static_cast<T>(n);
      const T var = sq / static_cast<T>(n) - mu * mu;
      const T istd = T(1) / std::sqrt(std::max(var, T(0)) + eps);
      if (stats) {
        stats->mean[static_cast<size_t>(b) * num_groups + g] = mu;
        stats->inv_std[static_cast<size_t>(b) * num_groups + g] = istd;
      }
      for (int cc = 0; cc < cg; ++cc) {
        const int ch = g * cg + cc;
        const T ga = gamma.v[ch], be = beta.v[ch];
        const T* sp = input.plane(b, ch);
        T* op = out.plane(b, ch);
        for (std::int64_t i = 0; i < plane; ++i) op[i] = (sp[i] - mu) * istd * ga + be;
      }
    }
  }
  return out;
}

template <typename T>
void group_norm_backward(const Grid<T>& input, int num_groups, const Grid<T>& gamma, const GroupNormStats<T>& stats,
                         const Grid<T>& grad_out, Grid<T>* grad_input, Grid<T>* grad_gamma, Grid<T>* grad_beta) {
  const int c = input.shape.c;
  const int cg = c / num_groups;
  const std::int64_t plane = static_cast<std::int64_t>(input.shape.h) * input.shape.w;
  const std::int64_t n = cg * plane;

  for (int b = 0; b < input.shape.b; ++b) {
    for (int g = 0; g < num_groups; ++g) {
      const T mu = stats.mean[static_cast<size_t>(b) * num_groups + g];
      const T istd = stats.inv_std[static_cast<size_t>(b) * num_groups + g];
      // First pass: reductions over the group.
      T sum_dxhat = 0, sum_dxhat_xhat = 0;
      for (int cc = 0; cc < cg; ++cc) {
        const int ch = g * cg + cc;
        const T ga = gamma.v[ch];
        const T* sp = input.plane(b, ch);
        const T* go = grad_out.plane(b, ch);
        T dg = 0, db = 0;
        for (std::int64_t i = 0; i < plane; ++i) {
          const T xhat = (sp[i] - mu) * istd;
          const T dxhat = go[i] * ga;
          sum_dxhat += dxhat;
          sum_dxhat_xhat += dxhat * xhat;
          dg += go[i] * xhat;
          db += go[i];
        }
        if (grad_gamma) grad_gamma->v[ch] += dg;
        if (grad_beta) grad_beta->v[ch] += db;
      }
      if (!grad_input) continue;
      const T inv_n = T(1) / static_cast<T>(n);
      for (int cc = 0; cc < cg; ++cc) {
        const int ch = g * cg + cc;
        const T ga = gamma.v[ch];
        const T* sp = input.plane(b, ch);
        const T* go = grad_out.plane(b, ch);
        T* gi = grad_input->plane(b, ch);
        for (std::int64_t i = 0; i < plane; ++i) {
          const T xhat = (sp[i] - mu) * istd;
          const T dxhat = go[i] * ga;
          gi[i] += istd * (dxhat - inv_n * sum_dxhat - xhat * inv_n * sum_dxhat_xhat);
        }
      }
    }
  }
}

// Backward-warp sampling: out(b,c,y,x) = source sampled bilinearly at
// (x + flow_dx, y + flow_dy), zero outside the grid. flow channel 0 is dx,
// channel 1 is dy, in cell units.
template <typename T>
Grid<T> bilinear_warp_forward(const Grid<T>& source, const Grid<T>& flow) {
  if (flow.shape.c != 2) throw ShapeError("bilinear_warp: flow must have 2 channels, got " + std::to_string(flow.shape.c));
  if (flow.shape.b != source.shape.b || flow.shape.h != source.shape.h || flow.shape.w != source.shape.w)
    throw ShapeError("bilinear_warp: flow spatial dims " + flow.shape.str() + " vs source " + source.shape.str());
  const int h = source.shape.h, w = source.shape.w;
  Grid<T> out(source.shape);
  for (int b = 0; b < source.shape.b; ++b) {
    const T* fx = flow.plane(b, 0);
    const T* fy = flow.plane(b, 1);
    for (int c = 0; c < source.shape.c; ++c) {
      const T* sp = source.plane(b, c);
      T* op = out.plane(b, c);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const std::int64_t i = static_cast<std::int64_t>(y) * w + x;
          const T px = static_cast<T>(x) + fx[i];
          const T py = static_cast<T>(y) + fy[i];
          const int x0 = static_cast<int>(std::floor(px));
          const int y0 = static_cast<int>(std::floor(py));
          const T wx = px - static_cast<T>(x0);
          const T wy = py - static_cast<T>(y0);
          auto at = [&](int yy, int xx) -> T {
            return (yy >= 0 && yy < h && xx >= 0 && xx < w) ? sp[static_cast<std::int64_t>(yy) * w + xx] : T(0);
          };
          op[i] = (T(1) - wy) * ((T(1) - wx) * at(y0, x0) + wx * at(y0, x0 + 1)) +
                  wy * ((T(1) - wx) * at(y0 + 1, x0) + wx * at(y0 + 1, x0 + 1));
        }
      }
    }
  }
  return out;
}

template <typename T>
void bilinear_warp_backward(const Grid<T>& source, const Grid<T>& flow, const Grid<T>& grad_out,
                            Grid<T>* grad_source, Grid<T>* grad_flow) {
  const int h = source.shape.h, w = source.shape.w;
  for (int b = 0; b < source.shape.b; ++b) {
    const T* fx = flow.plane(b, 0);
    const T* fy = flow.plane(b, 1);
    T* gfx = grad_flow ? grad_flow->plane(b, 0) : nullptr;
    T* gfy = grad_flow ? grad_flow->plane(b, 1) : nullptr;
    for (int c = 0; c < source.shape.c; ++c) {
      const T* sp = source.plane(b, c);
      const T* go = grad_out.plane(b, c);
      T* gs = grad_source ? grad_source->plane(b, c) : nullptr;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const std::int64_t i = static_cast<std::int64_t>(y) * w + x;
          const T g = go[i];
          if (g == T(0)) continue;
          const T px = static_cast<T>(x) + fx[i];
          const T py = static_cast<T>(y) + fy[i];
          const int x0 = static_cast<int>(std::floor(px));
          const int y0 = static_cast<int>(std::floor(py));
          const T wx = px - static_cast<T>(x0);
          const T wy = py - static_cast<T>(y0);
          auto in = [&](int yy, int xx) { return yy >= 0 && yy < h && xx >= 0 && xx < w; };
          auto at = [&](int yy, int xx) -> T { return in(yy, xx) ? sp[static_cast<std::int64_t>(yy) * w + xx] : T(0); };
          if (gs) {
            if (in(y0, x0)) gs[static_cast<std::int64_t>(y0) * w + x0] += g * (T(1) - wy) * (T(1) - wx);
            if (in(y0, x0 + 1)) gs[static_cast<std::int64_t>(y0) * w + x0 + 1] += g * (T(1) - wy) * wx;
            if (in(y0 + 1, x0)) gs[static_cast<std::int64_t>(y0 + 1) * w + x0] += g * wy * (T(1) - wx);
            if (in(y0 + 1, x0 + 1)) gs[static_cast<std::int64_t>(y0 + 1) * w + x0 + 1] += g * wy * wx;
          }
          if (gfx) {
            const T ddx = (T(1) - wy) * (at(y0, x0 + 1) - at(y0, x0)) + wy * (at(y0 + 1, x0 + 1) - at(y0 + 1, x0));
            const T ddy = (T(1) - wx) * (at(y0 + 1, x0) - at(y0, x0)) + wx * (at(y0 + 1, x0 + 1) - at(y0, x0 + 1));
            gfx[i] += g * ddx;
            gfy[i] += g * ddy;
          }
        }
      }
    }
  }
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

// Numerically stable binary cross-entropy on logits:
// max(z,0) - z*t + log(1 + exp(-|z|)).
template <typename T>
T bce_with_logits_scalar(T z, T t) {
  return std::max(z, T(0)) - z * t + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace ccflow::kernels
