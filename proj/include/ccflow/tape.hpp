#pragma once

// Reverse-mode differentiation over dense grids. A Tape owns one forward
// graph: nodes are appended in creation order (a valid topological order),
// and backward() walks them in reverse. A tape is single-owner: one
// forward/backward pass must not be mutated from two threads. Separate
// tapes on separate threads are fine.

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ccflow/kernels.hpp"
#include "ccflow/tensor.hpp"

namespace ccflow {

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // When recording is off, ops compute values only; backward() is unusable.
  void set_recording(bool on) { recording_ = on; }
  bool recording() const { return recording_; }

  size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  const Grid<T>& val(Var v) const { return nodes_[check(v)].value; }
  bool has_grad(Var v) const { return nodes_[check(v)].grad_ready; }
  const Grid<T>& grad(Var v) const {
    const Node& n = nodes_[check(v)];
    if (!n.grad_ready) throw ContractError("gradient slot not populated; run backward() first");
    return n.grad;
  }
  void clear_grads() {
    for (Node& n : nodes_) {
      n.grad = Grid<T>();
      n.grad_ready = false;
    }
  }

  Var leaf(Grid<T> value, bool requires_grad = false) {
    return push(std::move(value), requires_grad, {}, nullptr);
  }

  Var add(Var a, Var b) {
    require_same_shape(a, b, "add");
    Grid<T> out(val(a).shape);
    const auto& va = val(a).v;
    const auto& vb = val(b).v;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = va[i] + vb[i];
    return push(std::move(out), false, {a, b}, [a, b](Tape& t, int self) {
      const Grid<T>& g = t.scratch_[self];
      if (t.wants_grad(a)) t.accum(a, g);
      if (t.wants_grad(b)) t.accum(b, g);
    });
  }

  Var sub(Var a, Var b) {
    require_same_shape(a, b, "sub");
    Grid<T> out(val(a).shape);
    const auto& va = val(a).v;
    const auto& vb = val(b).v;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = va[i] - vb[i];
    return push(std::move(out), false, {a, b}, [a, b](Tape& t, int self) {
      const Grid<T>& g = t.scratch_[self];
      if (t.wants_grad(a)) t.accum(a, g);
      if (t.wants_grad(b)) {
        Grid<T>& gb = t.gslot(b);
        for (size_t i = 0; i < g.v.size(); ++i) gb.v[i] -= g.v[i];
      }
    });
  }

  // Hadamard product.
  Var mul(Var a, Var b) {
    require_same_shape(a, b, "mul");
    Grid<T> out(val(a).shape);
    const auto& va = val(a).v;
    const auto& vb = val(b).v;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = va[i] * vb[i];
    return push(std::move(out), false, {a, b}, [a, b](Tape& t, int self) {
      const Grid<T>& g = t.scratch_[self];
      if (t.wants_grad(a)) {
        Grid<T>& ga = t.gslot(a);
        const auto& vb = t.val(b).v;
        for (size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i] * vb[i];
      }
      if (t.wants_grad(b)) {
        Grid<T>& gb = t.gslot(b);
        const auto& va = t.val(a).v;
        for (size_t i = 0; i < g.v.size(); ++i) gb.v[i] += g.v[i] * va[i];
      }
    });
  }

  Var scale(Var a, T s) {
    Grid<T> out(val(a).shape);
    const auto& va = val(a).v;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = va[i] * s;
    return push(std::move(out), false, {a}, [a, s](Tape& t, int self) {
      const Grid<T>& g = t.scratch_[self];
      if (!t.wants_grad(a)) return;
      Grid<T>& ga = t.gslot(a);
      for (size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i] * s;
    });
  }

  Var abs_(Var a) {
    Grid<T> out(val(a).shape);
    const auto& va = val(a).v;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = std::abs(va[i]);
    return push(std::move(out), false, {a}, [a](Tape& t, int self) {
      const Grid<T>& g = t.scratch_[self];
      if (!t.wants_grad(a)) return;
      Grid<T>& ga = t.gslot(a);
      const auto& va = t.val(a).v;
      for (size_t i = 0; i < g.v.size(); ++i) {
        if (va[i] > T(0)) ga.v[i] += g.v[i];
        else if (va[i] < T(0)) ga.v[i] -= g.v[i];
      }
    });
  }

  Var square(Var a) {
    Grid<T> out(val(a).shape);
    const auto& va = val(a).v;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = va[i] * va[i];
    return push(std::move(out), false, {a}, [a](Tape& t, int self) {
      const Grid<T>& g = t.scratch_[self];
      if (!t.wants_grad(a)) return;
      Grid<T>& ga = t.gslot(a);
      const auto& va = t.val(a).v;
      for (size_t i = 0; i < g.v.size(); ++i) ga.v[i] += T(2) * g.v[i] * va[i];
    });
  }

  Var leaky_relu(Var a, T slope = T(0.01)) {
    Grid<T> out(val(a).shape);
    const auto& va = val(a).v;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = va[i] > T(0) ? va[i] : slope * va[i];
    return push(std::move(out), false, {a}, [a, slope](Tape& t, int self) {
      const Grid<T>& g = t.scratch_[self];
      if (!t.wants_grad(a)) return;
      Grid<T>& ga = t.gslot(a);
      const auto& va = t.val(a).v;
      for (size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i] * (va[i] > T(0) ? T(1) : slope);
    });
  }

  Var sigmoid(Var a) {
    Grid<T> out(val(a).shape);
    const auto& va = val(a).v;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = kernels::stable_sigmoid(va[i]);
    Var r = push(std::move(out), false, {a}, nullptr);
    if (recording_)
      nodes_[r.id].back = [a, r](Tape& t, int self) {
        const Grid<T>& g = t.scratch_[self];
        if (!t.wants_grad(a)) return;
        Grid<T>& ga = t.gslot(a);
        const auto& y = t.val(r).v;
        for (size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i] * y[i] * (T(1) - y[i]);
      };
    return r;
  }

  Var tanh_(Var a) {
    Grid<T> out(val(a).shape);
    const auto& va = val(a).v;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = std::tanh(va[i]);
    Var r = push(std::move(out), false, {a}, nullptr);
    if (recording_)
      nodes_[r.id].back = [a, r](Tape& t, int self) {
        const Grid<T>& g = t.scratch_[self];
        if (!t.wants_grad(a)) return;
        Grid<T>& ga = t.gslot(a);
        const auto& y = t.val(r).v;
        for (size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i] * (T(1) - y[i] * y[i]);
      };
    return r;
  }

  // Elementwise BCE-with-logits against a constant target grid.
  Var bce_with_logits(Var logits, Var targets) {
    require_same_shape(logits, targets, "bce_with_logits");
    Grid<T> out(val(logits).shape);
    const auto& z = val(logits).v;
    const auto& tg = val(targets).v;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = kernels::bce_with_logits_scalar(z[i], tg[i]);
    return push(std::move(out), false, {logits, targets}, [logits, targets](Tape& t, int self) {
      const Grid<T>& g = t.scratch_[self];
      if (!t.wants_grad(logits)) return;
      Grid<T>& gl = t.gslot(logits);
      const auto& z = t.val(logits).v;
      const auto& tg = t.val(targets).v;
      for (size_t i = 0; i < g.v.size(); ++i) gl.v[i] += g.v[i] * (kernels::stable_sigmoid(z[i]) - tg[i]);
    });
  }

  Var conv2d(Var x, Var w, Var bias, int stride) {
    const Grid<T>* bp = bias.valid() ? &val(bias) : nullptr;
    Grid<T> out = kernels::conv2d_forward(val(x), val(w), bp, stride);
    return push(std::move(out), false, bias.valid() ? std::vector<Var>{x, w, bias} : std::vector<Var>{x, w},
                [x, w, bias, stride](Tape& t, int self) {
                  const Grid<T>& g = t.scratch_[self];
                  Grid<T>* gx = t.wants_grad(x) ? &t.gslot(x) : nullptr;
                  Grid<T>* gw = t.wants_grad(w) ? &t.gslot(w) : nullptr;
                  Grid<T>* gb = (bias.valid() && t.wants_grad(bias)) ? &t.gslot(bias) : nullptr;
                  if (gx || gw || gb) kernels::conv2d_backward(t.val(x), t.val(w), stride, g, gx, gw, gb);
                });
  }

  Var conv_transpose2d(Var x, Var w, Var bias, int stride) {
    const Grid<T>* bp = bias.valid() ? &val(bias) : nullptr;
    Grid<T> out = kernels::conv_transpose2d_forward(val(x), val(w), bp, stride);
    return push(std::move(out), false, bias.valid() ? std::vector<Var>{x, w, bias} : std::vector<Var>{x, w},
                [x, w, bias, stride](Tape& t, int self) {
                  const Grid<T>& g = t.scratch_[self];
                  Grid<T>* gx = t.wants_grad(x) ? &t.gslot(x) : nullptr;
                  Grid<T>* gw = t.wants_grad(w) ? &t.gslot(w) : nullptr;
                  Grid<T>* gb = (bias.valid() && t.wants_grad(bias)) ? &t.gslot(bias) : nullptr;
                  if (gx || gw || gb) kernels::conv_transpose2d_backward(t.val(x), t.val(w), stride, g, gx, gw, gb);
                });
  }

  Var group_norm(Var x, int num_groups, Var gamma, Var beta, T eps = T(1e-5)) {
    auto stats = std::make_shared<kernels::GroupNormStats<T>>();
    Grid<T> out = kernels::group_norm_forward(val(x), num_groups, val(gamma), val(beta), eps, stats.get());
    return push(std::move(out), false, {x, gamma, beta}, [x, num_groups, gamma, beta, stats](Tape& t, int self) {
      const Grid<T>& g = t.scratch_[self];
      Grid<T>* gx = t.wants_grad(x) ? &t.gslot(x) : nullptr;
      Grid<T>* gg = t.wants_grad(gamma) ? &t.gslot(gamma) : nullptr;
      Grid<T>* gb = t.wants_grad(beta) ? &t.gslot(beta) : nullptr;
      if (gx || gg || gb) kernels::group_norm_backward(t.val(x), num_groups, t.val(gamma), *stats, g, gx, gg, gb);
    });
  }

  Var bilinear_warp(Var source, Var flow) {
    Grid<T> out = kernels::bilinear_warp_forward(val(source), val(flow));
    return push(std::move(out), false, {source, flow}, [source, flow](Tape& t, int self) {
      const Grid<T>& g = t.scratch_[self];
      Grid<T>* gs = t.wants_grad(source) ? &t.gslot(source) : nullptr;
      Grid<T>* gf = t.wants_grad(flow) ? &t.gslot(flow) : nullptr;
      if (gs || gf) kernels::bilinear_warp_backward(t.val(source), t.val(flow), g, gs, gf);
    });
  }

  Var concat_channels(const std::vector<Var>& xs) {
    if (xs.empty()) throw ShapeError("concat_channels: empty input list");
    const Shape s0 = val(xs[0]).shape;
    int c_total = 0;
    for (Var v : xs) {
      const Shape& s = val(v).shape;
      if (s.b != s0.b || s.h != s0.h || s.w != s0.w)
        throw ShapeError("concat_channels: spatial/batch mismatch " + s.str() + " vs " + s0.str());
      c_total += s.c;
    }
    Grid<T> out(s0.b, c_total, s0.h, s0.w);
    const std::int64_t plane = static_cast<std::int64_t>(s0.h) * s0.w;
    for (int b = 0; b < s0.b; ++b) {
      int co = 0;
      for (Var v : xs) {
        const Grid<T>& g = val(v);
        std::copy(g.plane(b, 0), g.plane(b, 0) + static_cast<std::int64_t>(g.shape.c) * plane, out.plane(b, co));
        co += g.shape.c;
      }
    }
    std::vector<Var> ins = xs;
    return push(std::move(out), false, ins, [ins](Tape& t, int self) {
      const Grid<T>& g = t.scratch_[self];
      const std::int64_t plane = static_cast<std::int64_t>(g.shape.h) * g.shape.w;
      for (int b = 0; b < g.shape.b; ++b) {
        int co = 0;
        for (Var v : ins) {
          const int c = t.val(v).shape.c;
          if (t.wants_grad(v)) {
            Grid<T>& gv = t.gslot(v);
            const T* src = g.plane(b, co);
            T* dst = gv.plane(b, 0);
            for (std::int64_t i = 0; i < static_cast<std::int64_t>(c) * plane; ++i) dst[i] += src[i];
          }
          co += c;
        }
      }
    });
  }

  Var slice_channels(Var x, int c0, int count) {
    const Shape s = val(x).shape;
    if (c0 < 0 || count < 1 || c0 + count > s.c) throw ShapeError("slice_channels: range out of bounds");
    Grid<T> out(s.b, count, s.h, s.w);
    const std::int64_t plane = static_cast<std::int64_t>(s.h) * s.w;
    for (int b = 0; b < s.b; ++b)
      std::copy(val(x).plane(b, c0), val(x).plane(b, c0) + static_cast<std::int64_t>(count) * plane, out.plane(b, 0));
    return push(std::move(out), false, {x}, [x, c0, count](Tape& t, int self) {
      const Grid<T>& g = t.scratch_[self];
      if (!t.wants_grad(x)) return;
      Grid<T>& gx = t.gslot(x);
      const std::int64_t plane = static_cast<std::int64_t>(g.shape.h) * g.shape.w;
      for (int b = 0; b < g.shape.b; ++b) {
        const T* src = g.plane(b, 0);
        T* dst = gx.plane(b, c0);
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(count) * plane; ++i) dst[i] += src[i];
      }
    });
  }

  Var crop_center(Var x, int h, int w) {
    const Shape s = val(x).shape;
    if (h > s.h || w > s.w) throw ShapeError("crop_center: crop larger than input");
    const int y0 = (s.h - h) / 2;
    const int x0 = (s.w - w) / 2;
    Grid<T> out(s.b, s.c, h, w);
    for (int b = 0; b < s.b; ++b)
      for (int c = 0; c < s.c; ++c)
        for (int y = 0; y < h; ++y)
          std::copy(&val(x).at(b, c, y0 + y, x0), &val(x).at(b, c, y0 + y, x0) + w, &out.at(b, c, y, 0));
    return push(std::move(out), false, {x}, [x, h, w, y0, x0](Tape& t, int self) {
      const Grid<T>& g = t.scratch_[self];
      if (!t.wants_grad(x)) return;
      Grid<T>& gx = t.gslot(x);
      for (int b = 0; b < g.shape.b; ++b)
        for (int c = 0; c < g.shape.c; ++c)
          for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) gx.at(b, c, y0 + y, x0 + xx) += g.at(b, c, y, xx);
    });
  }

  // Full reduction to a scalar (1,1,1,1) node. Fixed summation order.
  Var sum(Var x) {
    T s = 0;
    for (const T& v : val(x).v) s += v;
    Grid<T> out(1, 1, 1, 1, s);
    return push(std::move(out), false, {x}, [x](Tape& t, int self) {
      const Grid<T>& g = t.scratch_[self];
      if (!t.wants_grad(x)) return;
      Grid<T>& gx = t.gslot(x);
      const T gv = g.v[0];
      for (auto& e : gx.v) e += gv;
    });
  }

  Var mean(Var x) { return scale(sum(x), T(1) / static_cast<T>(val(x).numel())); }

  // Propagates one unit of gradient from a scalar root. Contributions land
  // in persistent per-node slots; calling backward again accumulates.
  void backward(Var root) {
    if (!recording_) throw ContractError("backward() on a non-recording tape");
    if (val(root).numel() != 1) throw ContractError("backward root must be scalar, got " + val(root).shape.str());

    // Reachability from the root through recorded inputs.
    std::vector<char> reach(nodes_.size(), 0);
    reach[root.id] = 1;
    for (int i = root.id; i >= 0; --i) {
      if (!reach[i]) continue;
      for (Var in : nodes_[i].inputs) reach[in.id] = 1;
    }

    scratch_.assign(nodes_.size(), Grid<T>());
    scratch_[root.id] = Grid<T>(1, 1, 1, 1, T(1));
    for (int i = root.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (!reach[i] || !n.back || scratch_[i].empty()) continue;
      if (!n.needs_grad) continue;
      n.back(*this, i);
    }
    for (size_t i = 0; i < nodes_.size(); ++i) {
      if (!reach[i]) continue;
      Node& n = nodes_[i];
      if (scratch_[i].empty()) {
        // Reachable but received no gradient flow (e.g. constant subgraph):
        // the slot is still populated, with zeros, per the node contract.
        if (!n.grad_ready) {
          n.grad = Grid<T>(n.value.shape, T(0));
          n.grad_ready = true;
        }
        continue;
      }
      if (!n.grad_ready) {
        n.grad = std::move(scratch_[i]);
        n.grad_ready = true;
      } else {
        for (size_t j = 0; j < n.grad.v.size(); ++j) n.grad.v[j] += scratch_[i].v[j];
      }
    }
    scratch_.clear();
  }

 private:
  struct Node {
    Grid<T> value;
    Grid<T> grad;
    bool grad_ready = false;
    bool needs_grad = false;  // requires_grad or depends on such a node
    std::vector<Var> inputs;
    std::function<void(Tape&, int)> back;
  };

  bool wants_grad(Var v) const { return nodes_[v.id].needs_grad; }

  // Scratch gradient for a node during one backward pass, lazily zeroed.
  Grid<T>& gslot(Var v) {
    Grid<T>& g = scratch_[v.id];
    if (g.empty()) g = Grid<T>(nodes_[v.id].value.shape, T(0));
    return g;
  }
  void accum(Var v, const Grid<T>& g) {
    Grid<T>& gv = gslot(v);
    for (size_t i = 0; i < gv.v.size(); ++i) gv.v[i] += g.v[i];
  }

  int check(Var v) const {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) throw ContractError("invalid Var handle");
    return v.id;
  }

  void require_same_shape(Var a, Var b, const char* op) const {
    if (val(a).shape != val(b).shape)
      throw ShapeError(std::string(op) + ": " + val(a).shape.str() + " vs " + val(b).shape.str());
  }

  Var push(Grid<T> value, bool requires_grad, std::vector<Var> inputs, std::function<void(Tape&, int)> back) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = requires_grad;
    if (recording_) {
      for (Var in : inputs) n.needs_grad = n.needs_grad || nodes_[in.id].needs_grad;
      n.inputs = std::move(inputs);
      n.back = std::move(back);
    }
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
  std::vector<Grid<T>> scratch_;
  bool recording_ = true;
};

}  // namespace ccflow
