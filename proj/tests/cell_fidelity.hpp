#pragma once

// Shared helpers for equation-fidelity checks: hand-sized cell parameters,
// a scalar gate-net transcription built on the oracle kernels, and tape
// binding for bare cells (outside the full model's width schedule).

#include "ccflow/model.hpp"
#include "oracles.hpp"

namespace fidelity {

using namespace ccflow;
using namespace ccflow::model;

template <typename T>
CellP<T> tiny_cell(int c, int in_ch, int k, Rng& rng) {
  auto conv = [&](int co, int ci) {
    ConvP<T> l;
    l.w = random_grid<T>(Shape(co, ci, k, k), rng, -0.3, 0.3);
    l.b = random_grid<T>(Shape(1, co, 1, 1), rng, -0.1, 0.1);
    return l;
  };
  auto norm = [&](int ch) {
    NormP<T> n;
    n.gamma = random_grid<T>(Shape(1, ch, 1, 1), rng, 0.5, 1.5);
    n.beta = random_grid<T>(Shape(1, ch, 1, 1), rng, -0.2, 0.2);
    n.groups = 1;
    return n;
  };
  auto gate = [&]() {
    GateNetP<T> g;
    g.c1 = conv(c, in_ch);
    g.n1 = norm(c);
    g.c2 = conv(c, c);
    g.n2 = norm(c);
    g.c3 = conv(c, c);
    return g;
  };
  CellP<T> cell;
  cell.input = gate();
  cell.forget = gate();
  cell.gate = gate();
  cell.output = gate();
  cell.state_norm = norm(c);
  return cell;
}

// conv -> leaky -> gn -> conv -> leaky -> gn -> conv via oracle kernels.
template <typename T>
Grid<T> oracle_gate(const GateNetP<T>& g, const Grid<T>& x, T slope) {
  auto lrelu = [slope](Grid<T> in) {
    for (auto& v : in.v) v = v > T(0) ? v : slope * v;
    return in;
  };
  Grid<T> a = oracle::conv2d(x, g.c1.w, &g.c1.b, 1);
  a = oracle::group_norm(lrelu(std::move(a)), g.n1.groups, g.n1.gamma, g.n1.beta, T(1e-5));
  a = oracle::conv2d(a, g.c2.w, &g.c2.b, 1);
  a = oracle::group_norm(lrelu(std::move(a)), g.n2.groups, g.n2.gamma, g.n2.beta, T(1e-5));
  return oracle::conv2d(a, g.c3.w, &g.c3.b, 1);
}

template <typename T>
BoundCell<T> bind_cell(Tape<T>& t, CellP<T>& c) {
  auto conv = [&](ConvP<T>& l) {
    BoundConv<T> b;
    b.w = t.leaf(l.w);
    b.b = t.leaf(l.b);
    b.stride = l.stride;
    return b;
  };
  auto norm = [&](NormP<T>& n) {
    BoundNorm<T> b;
    b.gamma = t.leaf(n.gamma);
    b.beta = t.leaf(n.beta);
    b.groups = n.groups;
    return b;
  };
  auto gate = [&](GateNetP<T>& g) {
    BoundGateNet<T> b;
    b.c1 = conv(g.c1);
    b.n1 = norm(g.n1);
    b.c2 = conv(g.c2);
    b.n2 = norm(g.n2);
    b.c3 = conv(g.c3);
    return b;
  };
  BoundCell<T> b;
  b.input = gate(c.input);
  b.forget = gate(c.forget);
  b.gate = gate(c.gate);
  b.output = gate(c.output);
  b.state_norm = norm(c.state_norm);
  return b;
}

}  // namespace fidelity
